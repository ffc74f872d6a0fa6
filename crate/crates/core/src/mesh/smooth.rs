use super::topology::{check_manifold_edges, face_vertex_neighbors, vertex_faces};
use super::{Mesh, MeshError};
use crate::geom::{centroid, triangle_cross, Vec3};

pub const DEFAULT_SMOOTH_ITERATIONS: usize = 30;

/// Normal smoothing followed by vertex fitting, repeated `iterations` times.
///
/// Each iteration replaces every face normal by the area-weighted mean of
/// the normals of the faces sharing a vertex with it (one Jacobi pass), then
/// moves every vertex, in index order, towards the planes through its
/// incident face centroids with the smoothed normals (one Gauss-Seidel
/// pass). Connectivity is untouched.
pub fn laplacian_smooth(mesh: &Mesh, iterations: usize) -> Result<Mesh, MeshError> {
    check_manifold_edges(mesh)?;
    let vf = vertex_faces(mesh);
    let ff = face_vertex_neighbors(mesh, &vf);
    let mut pos = mesh.vertices.clone();
    let nf = mesh.faces.len();
    let mut raw = vec![Vec3::zeros(); nf];
    let mut smooth = vec![Vec3::zeros(); nf];

    for _ in 0..iterations {
        for (f, face) in mesh.faces.iter().enumerate() {
            // |cross| = 2·area, so the cross product is already area weighted.
            raw[f] = triangle_cross(&pos[face[0]], &pos[face[1]], &pos[face[2]]);
        }
        for f in 0..nf {
            let mut n = raw[f];
            for &g in &ff[f] {
                n += raw[g];
            }
            let l = n.norm();
            smooth[f] = if l > 0.0 { n / l } else { Vec3::zeros() };
        }
        for v in 0..pos.len() {
            let faces = &vf[v];
            if faces.is_empty() {
                continue;
            }
            let mut delta = Vec3::zeros();
            for &f in faces {
                let [a, b, c] = mesh.faces[f];
                let cf = centroid(&pos[a], &pos[b], &pos[c]);
                let n = smooth[f];
                delta += n * n.dot(&(cf - pos[v]));
            }
            pos[v] += delta / faces.len() as f64;
        }
    }
    Ok(Mesh {
        vertices: pos,
        faces: mesh.faces.clone(),
        normals: None,
    })
}
