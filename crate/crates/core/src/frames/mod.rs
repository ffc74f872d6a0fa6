//! Seed points and rigid reference frames for patch extraction, derived
//! from a quad mesh that is either imported or generated internally.

mod fallback;
mod import;
mod offsets;
mod orient;

pub use fallback::{generate_fallback_frames, FallbackOptions};
pub use import::{import_quad_mesh, read_quad_obj, write_quad_obj};
pub use offsets::expand_offsets;
pub use orient::{orient_frames, propagate_orientation, quad_frame};

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::geom::{Mat3, Vec3};
use crate::mesh::{Mesh, MeshError};

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frames file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("face {face} has {arity} vertices; the quad importer accepts only quads")]
    NotAQuad { face: usize, arity: usize },
    #[error("quad {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("quad {quad} references vertex {index} but there are {vertex_count} vertices")]
    IndexOutOfRange {
        quad: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("quad edge ({0}, {1}) is shared by {2} quads")]
    NonManifoldEdge(usize, usize, usize),
    #[error("quad {0} is degenerate (zero normal)")]
    DegenerateQuad(usize),
    #[error("surface too small for a single seed at spacing {0}")]
    SurfaceTooSmall(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Quad mesh with quad-to-quad adjacency. For imported meshes adjacency is
/// derived from shared edges; generated meshes carry explicit links.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    pub vertices: Vec<Vec3>,
    pub quads: Vec<[usize; 4]>,
    /// Sorted neighbour lists, symmetric.
    pub adjacency: Vec<Vec<usize>>,
}

impl QuadMesh {
    pub fn new(vertices: Vec<Vec3>, quads: Vec<[usize; 4]>) -> Result<Self, FrameError> {
        validate(&vertices, &quads)?;
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (qi, q) in quads.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (q[k], q[(k + 1) % 4]);
                edges.entry((a.min(b), a.max(b))).or_default().push(qi);
            }
        }
        let mut adjacency = vec![Vec::new(); quads.len()];
        for (&(a, b), owners) in &edges {
            if owners.len() > 2 {
                return Err(FrameError::NonManifoldEdge(a, b, owners.len()));
            }
            if let [p, q] = owners[..] {
                if p != q {
                    adjacency[p].push(q);
                    adjacency[q].push(p);
                }
            }
        }
        for l in &mut adjacency {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self {
            vertices,
            quads,
            adjacency,
        })
    }

    /// Quad mesh with caller-supplied adjacency, symmetrized and sorted.
    pub fn with_adjacency(
        vertices: Vec<Vec3>,
        quads: Vec<[usize; 4]>,
        links: &[(usize, usize)],
    ) -> Result<Self, FrameError> {
        validate(&vertices, &quads)?;
        let mut adjacency = vec![Vec::new(); quads.len()];
        for &(a, b) in links {
            if a >= quads.len() || b >= quads.len() {
                return Err(FrameError::InvalidArgument(format!("link ({a}, {b}) out of range")));
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for l in &mut adjacency {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self {
            vertices,
            quads,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    /// Number of undirected adjacency links.
    pub fn link_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn corners(&self, q: usize) -> [Vec3; 4] {
        self.quads[q].map(|i| self.vertices[i])
    }

    pub fn centroid(&self, q: usize) -> Vec3 {
        let c = self.corners(q);
        (c[0] + c[1] + c[2] + c[3]) / 4.0
    }

    /// Normalized cross product of the diagonals; `None` if degenerate.
    pub fn normal(&self, q: usize) -> Option<Vec3> {
        let c = self.corners(q);
        let n = (c[2] - c[0]).cross(&(c[3] - c[1]));
        let l = n.norm();
        (l > 1e-300 && l.is_finite()).then(|| n / l)
    }

    /// Mean side length over all quads.
    pub fn mean_edge_length(&self) -> f64 {
        if self.quads.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for q in 0..self.quads.len() {
            let c = self.corners(q);
            for k in 0..4 {
                sum += (c[(k + 1) % 4] - c[k]).norm();
            }
        }
        sum / (4 * self.quads.len()) as f64
    }

    /// Fan split of every quad into `[a, b, c]`, `[a, c, d]`.
    pub fn triangulate(&self) -> Mesh {
        let faces = self
            .quads
            .iter()
            .flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]])
            .collect();
        Mesh::new(self.vertices.clone(), faces).expect("quad indices were validated")
    }
}

fn validate(vertices: &[Vec3], quads: &[[usize; 4]]) -> Result<(), FrameError> {
    for (qi, q) in quads.iter().enumerate() {
        for &i in q {
            if i >= vertices.len() {
                return Err(FrameError::IndexOutOfRange {
                    quad: qi,
                    index: i,
                    vertex_count: vertices.len(),
                });
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                if q[a] == q[b] {
                    return Err(FrameError::RepeatedVertex(qi));
                }
            }
        }
    }
    Ok(())
}

/// Local coordinate system at a seed. Rows of `rotation` are the local X,
/// Y, Z axes in world coordinates, so `local = R (p - seed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchFrame {
    pub seed: Vec3,
    pub rotation: Mat3,
    pub quad_id: usize,
    /// 0 for a quad centre, `1 + 4(j-1) + dir` for offsets.
    pub offset_id: usize,
}

impl PatchFrame {
    pub fn from_axes(seed: Vec3, x: Vec3, y: Vec3, z: Vec3, quad_id: usize, offset_id: usize) -> Self {
        let rotation = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self {
            seed,
            rotation,
            quad_id,
            offset_id,
        }
    }

    pub fn x_axis(&self) -> Vec3 {
        self.rotation.row(0).transpose()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.rotation.row(1).transpose()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.rotation.row(2).transpose()
    }

    /// Homogeneous world-to-local transform `[[R, -R s], [0, 1]]`.
    pub fn transform(&self) -> Matrix4<f64> {
        let t = -(self.rotation * self.seed);
        let r = &self.rotation;
        Matrix4::new(
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    #[inline]
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.seed)
    }

    #[inline]
    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.rotation.tr_mul(local) + self.seed
    }

    /// Checks orthonormality and orientation within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let rrt = self.rotation * self.rotation.transpose();
        (rrt - Mat3::identity()).amax() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    /// The frame after applying the rigid motion `p ↦ q p + t` to the world.
    pub fn moved(&self, q: &Mat3, t: &Vec3) -> Self {
        Self {
            seed: q * self.seed + t,
            rotation: self.rotation * q.transpose(),
            ..*self
        }
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct FrameRecord {
    seed: [f64; 3],
    R: [f64; 9],
    quad_id: usize,
    offset_id: usize,
}

pub fn frames_to_json(frames: &[PatchFrame]) -> serde_json::Value {
    let recs: Vec<FrameRecord> = frames
        .iter()
        .map(|f| {
            let mut r = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    r[3 * i + j] = f.rotation[(i, j)];
                }
            }
            FrameRecord {
                seed: [f.seed.x, f.seed.y, f.seed.z],
                R: r,
                quad_id: f.quad_id,
                offset_id: f.offset_id,
            }
        })
        .collect();
    serde_json::to_value(recs).expect("frames serialize")
}

pub fn save_frames(path: impl AsRef<Path>, frames: &[PatchFrame]) -> Result<(), FrameError> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, &frames_to_json(frames))?;
    Ok(())
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<Vec<PatchFrame>, FrameError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let recs: Vec<FrameRecord> = serde_json::from_reader(f)?;
    Ok(recs
        .into_iter()
        .map(|r| PatchFrame {
            seed: Vec3::from(r.seed),
            rotation: Mat3::from_row_slice(&r.R),
            quad_id: r.quad_id,
            offset_id: r.offset_id,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn grid_and_cube_adjacency() {
        let g = shapes::plane_quads(2, 1.0);
        assert_eq!(g.len(), 4);
        assert_eq!(g.link_count(), 4);
        let c = shapes::cube_quads(1.0);
        assert_eq!(c.len(), 6);
        assert_eq!(c.link_count(), 12);
        for (q, l) in c.adjacency.iter().enumerate() {
            assert_eq!(l.len(), 4);
            for &n in l {
                assert!(c.adjacency[n].contains(&q));
            }
        }
    }

    #[test]
    fn repeated_vertex_rejected() {
        let v = vec![Vec3::zeros(); 4];
        assert!(matches!(QuadMesh::new(v, vec![[0, 1, 1, 2]]), Err(FrameError::RepeatedVertex(0))));
    }

    #[test]
    fn transform_matches_to_local() {
        let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), 0.7);
        let f = PatchFrame {
            seed: Vec3::new(0.1, 0.2, -0.3),
            rotation: *r.matrix(),
            quad_id: 0,
            offset_id: 0,
        };
        assert!(f.is_rigid(1e-12));
        let p = Vec3::new(-0.4, 0.9, 0.25);
        let h = f.transform() * p.push(1.0);
        assert!((h.xyz() - f.to_local(&p)).norm() < 1e-14);
        assert!((f.to_world(&f.to_local(&p)) - p).norm() < 1e-14);
        let t = f.transform();
        assert_eq!(t.fixed_view::<3, 3>(0, 0).into_owned(), f.rotation);
    }

    #[test]
    fn frames_json_roundtrip() {
        let f = PatchFrame::from_axes(Vec3::new(1.0, 2.0, 3.0), Vec3::y(), Vec3::z(), Vec3::x(), 7, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("frames.json");
        save_frames(&p, &[f]).unwrap();
        assert_eq!(load_frames(&p).unwrap(), vec![f]);
        let v = frames_to_json(&[f]);
        assert_eq!(v[0]["R"].as_array().unwrap().len(), 9);
    }
}
