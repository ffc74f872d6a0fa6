//! Evaluation: cloud-to-mesh distance, RMSE, PSNR and compression
//! accounting, with JSON and text-table reports.

mod bvh;
mod report;

pub use bvh::{brute_force_distance, Bvh, Closest};
pub use report::TextTable;

use serde::{Deserialize, Serialize};

use crate::frames::QuadMesh;
use crate::geom::Vec3;
use crate::mesh::Mesh;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no points to evaluate")]
    NoPoints,
    #[error("reference mesh has no faces")]
    EmptyReference,
    #[error("length mismatch: {0} estimates for {1} reference points")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudDistances {
    pub distances: Vec<f64>,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
}

impl CloudDistances {
    fn from_distances(distances: Vec<f64>) -> Self {
        let n = distances.len() as f64;
        let mean = distances.iter().sum::<f64>() / n;
        let rms = (distances.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
        let max = distances.iter().copied().fold(0.0, f64::max);
        Self {
            distances,
            mean,
            rms,
            max,
        }
    }
}

/// Exact distance from every point to the closest point of `reference`.
pub fn cloud_to_mesh(points: &[Vec3], reference: &Mesh) -> Result<CloudDistances, MetricsError> {
    cloud_to_bvh(points, &Bvh::new(reference))
}

pub fn cloud_to_bvh(points: &[Vec3], bvh: &Bvh) -> Result<CloudDistances, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::NoPoints);
    }
    if bvh.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    Ok(CloudDistances::from_distances(bvh.distances(points)))
}

/// `sqrt(mean ‖a_i − b_i‖²)` over paired points; 0 for no points.
pub fn rmse(estimates: &[Vec3], truth: &[Vec3]) -> Result<f64, MetricsError> {
    if estimates.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(estimates.len(), truth.len()));
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = estimates.iter().zip(truth).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok((s / estimates.len() as f64).sqrt())
}

/// `20 log10(diag / rms)` with `diag` the bounding-box diagonal of the
/// reference. `f64::INFINITY` when the RMS error is zero.
pub fn psnr_from_rms(diagonal: f64, rms: f64) -> f64 {
    if rms == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (diagonal / rms).log10()
}

/// PSNR of the vertices of `reconstructed` against the surface of `reference`.
pub fn psnr(reconstructed: &Mesh, reference: &Mesh) -> Result<f64, MetricsError> {
    let d = cloud_to_mesh(&reconstructed.vertices, reference)?;
    Ok(psnr_from_rms(reference.bounding_box().diagonal(), d.rms))
}

/// Entity counts of a mesh versus its sparse patch encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionLedger {
    pub faces: usize,
    pub vertices: usize,
    /// `3·|F| + |V|`.
    pub mesh_entities: usize,
    pub patches: usize,
    pub sparsity: usize,
    /// `k · #patches`.
    pub coefficient_entities: usize,
    /// `3·|quad vertices| + 4·|quads|`.
    pub quad_entities: usize,
    pub patch_entities: usize,
    pub compression_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

pub fn compression_ledger(patches: usize, k: usize, quad: &QuadMesh, source: &Mesh, psnr: Option<f64>) -> CompressionLedger {
    let mesh_entities = 3 * source.faces.len() + source.vertices.len();
    let coefficient_entities = k * patches;
    let quad_entities = 3 * quad.vertices.len() + 4 * quad.quads.len();
    let patch_entities = coefficient_entities + quad_entities;
    CompressionLedger {
        faces: source.faces.len(),
        vertices: source.vertices.len(),
        mesh_entities,
        patches,
        sparsity: k,
        coefficient_entities,
        quad_entities,
        patch_entities,
        compression_factor: if patch_entities == 0 {
            f64::INFINITY
        } else {
            mesh_entities as f64 / patch_entities as f64
        },
        psnr,
    }
}

impl CompressionLedger {
    pub fn to_table(&self, name: &str) -> TextTable {
        let mut t = TextTable::new(&[
            "Mesh", "#Faces", "#Vertices", "Mesh entities", "#Patches", "Patch entities", "Compr factor", "PSNR",
        ]);
        t.row(vec![
            name.to_string(),
            self.faces.to_string(),
            self.vertices.to_string(),
            self.mesh_entities.to_string(),
            self.patches.to_string(),
            self.patch_entities.to_string(),
            format!("{:.1}", self.compression_factor),
            self.psnr.map_or("-".into(), |p| format!("{p:.1}")),
        ]);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn vertex_distance_is_zero_and_height_is_exact() {
        let m = shapes::plane_grid(4, 4, 10.0);
        let d = cloud_to_mesh(&m.vertices, &m).unwrap();
        assert!(d.distances.iter().all(|&x| x == 0.0));
        let p = [Vec3::new(1.3, 2.1, 0.25), Vec3::new(-0.7, 0.4, -1.5)];
        let c = m.bounding_box().center();
        let q: Vec<Vec3> = p.iter().map(|v| v + Vec3::new(c.x, c.y, 0.0)).collect();
        let d = cloud_to_mesh(&q, &m).unwrap();
        assert!((d.distances[0] - 0.25).abs() < 1e-12);
        assert!((d.distances[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn psnr_formula() {
        assert!((psnr_from_rms(1.0, 1e-3) - 60.0).abs() < 1e-9);
        let m = shapes::cube(1.0);
        assert_eq!(psnr(&m, &m).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ledger_linear_in_k() {
        let q = shapes::cube_quads(1.0);
        let m = shapes::icosphere(1, 1.0);
        let a = compression_ledger(10, 0, &q, &m, None);
        assert_eq!(a.patch_entities, 3 * 8 + 4 * 6);
        let b = compression_ledger(10, 20, &q, &m, None);
        let c = compression_ledger(10, 40, &q, &m, None);
        assert_eq!(c.coefficient_entities, 2 * b.coefficient_entities);
        assert_eq!(b.mesh_entities, 3 * m.faces.len() + m.vertices.len());
    }

    #[test]
    fn errors() {
        let m = shapes::cube(1.0);
        assert!(matches!(cloud_to_mesh(&[], &m), Err(MetricsError::NoPoints)));
        assert!(matches!(rmse(&[Vec3::zeros()], &[]), Err(MetricsError::LengthMismatch(1, 0))));
    }
}
