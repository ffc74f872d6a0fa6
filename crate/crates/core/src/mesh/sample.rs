use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Mesh, MeshError};
use crate::geom::Vec3;

/// Surface samples with their source face and that face's normal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub faces: Vec<usize>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cloud made of bare points (no source faces); normals are zero and
    /// face indices are `usize::MAX`.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let n = points.len();
        Self {
            points,
            normals: vec![Vec3::zeros(); n],
            faces: vec![usize::MAX; n],
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.normals.extend_from_slice(&other.normals);
        self.faces.extend_from_slice(&other.faces);
    }
}

/// Area-weighted uniform sampling, stratified per face: face `f` receives
/// `floor(density · area_f)` points plus one more with probability equal to
/// the fractional part. Each face draws from its own ChaCha stream, so the
/// result depends only on `seed` and not on thread scheduling.
pub fn sample_points(mesh: &Mesh, density: f64, seed: u64) -> Result<PointCloud, MeshError> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(MeshError::InvalidArgument(format!("density must be positive, got {density}")));
    }
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    let per_face: Vec<Vec<(Vec3, usize)>> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|f| {
            let area = mesh.face_area(f);
            if area <= 0.0 {
                return Vec::new();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(f as u64);
            let expected = density * area;
            let mut count = expected.floor() as usize;
            if rng.random::<f64>() < expected - expected.floor() {
                count += 1;
            }
            let [a, b, c] = mesh.triangle(f);
            (0..count)
                .map(|_| {
                    let s = rng.random::<f64>().sqrt();
                    let t = rng.random::<f64>();
                    (a * (1.0 - s) + b * (s * (1.0 - t)) + c * (s * t), f)
                })
                .collect()
        })
        .collect();
    let total_area = mesh.surface_area();
    if !(total_area > 0.0) {
        return Err(MeshError::ZeroArea);
    }
    let n: usize = per_face.iter().map(Vec::len).sum();
    let mut cloud = PointCloud {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        faces: Vec::with_capacity(n),
    };
    let face_normals = mesh.face_normals();
    for (p, f) in per_face.into_iter().flatten() {
        cloud.points.push(p);
        cloud.normals.push(face_normals[f]);
        cloud.faces.push(f);
    }
    Ok(cloud)
}
