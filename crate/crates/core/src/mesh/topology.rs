//! Adjacency queries over indexed triangle meshes.

use std::collections::HashMap;

use super::{Mesh, MeshError};

/// Undirected edge key with the smaller index first.
#[inline]
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Faces incident to each undirected edge.
pub fn edge_faces(mesh: &Mesh) -> HashMap<(usize, usize), Vec<usize>> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(mesh.faces.len() * 2);
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            map.entry(edge_key(f[k], f[(k + 1) % 3])).or_default().push(fi);
        }
    }
    map
}

/// Fails on the first edge (in face order) shared by more than two faces.
pub fn check_manifold_edges(mesh: &Mesh) -> Result<(), MeshError> {
    let ef = edge_faces(mesh);
    for f in &mesh.faces {
        for k in 0..3 {
            let key = edge_key(f[k], f[(k + 1) % 3]);
            let n = ef[&key].len();
            if n > 2 {
                return Err(MeshError::NonManifoldEdge(key.0, key.1, n));
            }
        }
    }
    Ok(())
}

/// Faces incident to each vertex, in increasing face order.
pub fn vertex_faces(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut vf = vec![Vec::new(); mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        for &v in f {
            vf[v].push(fi);
        }
    }
    vf
}

/// Sorted one-ring neighbours of each vertex.
pub fn vertex_neighbors(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); mesh.vertices.len()];
    for f in &mesh.faces {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            nb[a].push(b);
            nb[b].push(a);
        }
    }
    for l in &mut nb {
        l.sort_unstable();
        l.dedup();
    }
    nb
}

/// Faces sharing at least one vertex with each face (excluding itself),
/// sorted.
pub fn face_vertex_neighbors(mesh: &Mesh, vf: &[Vec<usize>]) -> Vec<Vec<usize>> {
    mesh.faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut l: Vec<usize> = f
                .iter()
                .flat_map(|&v| vf[v].iter().copied())
                .filter(|&g| g != fi)
                .collect();
            l.sort_unstable();
            l.dedup();
            l
        })
        .collect()
}

pub fn is_watertight(mesh: &Mesh) -> bool {
    edge_faces(mesh).values().all(|f| f.len() == 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn cube_is_watertight_and_manifold() {
        let m = shapes::cube(1.0);
        assert!(is_watertight(&m));
        check_manifold_edges(&m).unwrap();
        assert_eq!(edge_faces(&m).len(), 18);
    }

    #[test]
    fn fin_edge_is_non_manifold() {
        let mut m = shapes::plane_grid(2, 2, 1.0);
        let n = m.vertices.len();
        m.vertices.push(crate::geom::Vec3::new(0.0, 0.0, 1.0));
        let f0 = m.faces[0];
        m.faces.push([f0[0], f0[1], n]);
        m.faces.push([f0[1], f0[0], n]);
        let err = check_manifold_edges(&m).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge(_, _, 3)));
    }
}
