//! Indexed triangle meshes: representation, I/O, normalization, sampling,
//! smoothing and boundary extraction.

mod boundary;
pub mod io;
mod normalize;
mod sample;
mod smooth;
pub mod topology;

pub use boundary::{find_boundary_loops, BoundaryLoop};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use normalize::{decimate, loop_subdivide, normalize_mesh, ScaleRecord};
pub use sample::{sample_points, PointCloud};
pub use smooth::{laplacian_smooth, DEFAULT_SMOOTH_ITERATIONS};

use crate::geom::{triangle_area, triangle_cross, triangle_normal, Aabb, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("mesh is empty")]
    Empty,
    #[error("mesh has zero surface area")]
    ZeroArea,
    #[error("non-manifold edge ({0}, {1}) is shared by {2} faces")]
    NonManifoldEdge(usize, usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl Mesh {
    /// Builds a mesh, checking index bounds. Degenerate faces (repeated
    /// vertex indices) are dropped with a warning.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        let mut dropped = 0usize;
        for (fi, f) in faces.into_iter().enumerate() {
            for &i in &f {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: i as i64,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                dropped += 1;
                continue;
            }
            kept.push(f);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate face(s)");
        }
        Ok(Self {
            vertices,
            faces: kept,
            normals: None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [&Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        triangle_area(a, b, c)
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Unit face normal; zero vector for zero-area faces.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        triangle_normal(a, b, c).unwrap_or_else(Vec3::zeros)
    }

    pub fn face_normals(&self) -> Vec<Vec3> {
        (0..self.faces.len()).map(|f| self.face_normal(f)).collect()
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let [a, b, c] = self.triangle(fi);
            let n = triangle_cross(a, b, c);
            for &v in f {
                acc[v] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let l = n.norm();
                if l > 0.0 {
                    n / l
                } else {
                    n
                }
            })
            .collect()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Applies `f` to every vertex; normals are dropped.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            normals: None,
        }
    }

    /// Removes vertices not referenced by any face. Returns the compacted mesh
    /// and the old-to-new index map.
    pub fn compact(&self) -> (Mesh, Vec<Option<usize>>) {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v] = true;
            }
        }
        let mut remap = vec![None; self.vertices.len()];
        let mut vertices = Vec::new();
        for (v, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            remap[v] = Some(vertices.len());
            vertices.push(self.vertices[v]);
        }
        let faces = self
            .faces
            .iter()
            .map(|f| f.map(|v| remap[v].unwrap()))
            .collect();
        (
            Mesh {
                vertices,
                faces,
                normals: None,
            },
            remap,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_index_is_rejected() {
        let v = vec![Vec3::zeros(); 8];
        let err = Mesh::new(v, vec![[0, 1, 99]]).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 99, .. }));
    }

    #[test]
    fn degenerate_faces_are_dropped() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let m = Mesh::new(v, vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(m.faces.len(), 1);
    }

    #[test]
    fn compact_drops_unreferenced() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::z(), Vec3::y()];
        let m = Mesh::new(v, vec![[0, 1, 3]]).unwrap();
        let (c, map) = m.compact();
        assert_eq!(c.vertices.len(), 3);
        assert_eq!(map, vec![Some(0), Some(1), None, Some(2)]);
        assert_eq!(c.faces, vec![[0, 1, 2]]);
    }
}
