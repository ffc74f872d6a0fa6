use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InpaintError;
use crate::geom::Vec3;
use crate::mesh::{find_boundary_loops, sample_points, Mesh};
use crate::spatial::PointGrid;

/// Ground truth of a [`punch_holes`] run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRecord {
    pub centers: Vec<[f64; 3]>,
    pub hole_radius: f64,
    pub spacing: f64,
    pub seed: u64,
    /// Indices (in the undamaged mesh) of the removed vertices.
    pub removed_vertices: Vec<usize>,
    pub removed_positions: Vec<[f64; 3]>,
    /// Undamaged vertex index → index in the damaged mesh.
    pub vertex_map: Vec<Option<usize>>,
}

/// Removes every vertex closer than `hole_radius` to a hole centre, with
/// the faces touching it. Centres are a Poisson-disk set with minimum
/// distance `spacing`, kept at least `2 · hole_radius` away from any
/// existing boundary so every hole is an interior loop.
pub fn punch_holes(mesh: &Mesh, hole_radius: f64, spacing: f64, seed: u64) -> Result<(Mesh, HoleRecord), InpaintError> {
    if !(hole_radius > 0.0) || !hole_radius.is_finite() {
        return Err(InpaintError::InvalidArgument(format!("hole radius must be positive, got {hole_radius}")));
    }
    if !(spacing > 2.0 * hole_radius) || !spacing.is_finite() {
        return Err(InpaintError::InvalidArgument(format!(
            "spacing {spacing} must exceed twice the hole radius {hole_radius}"
        )));
    }
    if mesh.is_empty() {
        return Err(InpaintError::NoFacesLeft);
    }
    let border: Vec<Vec3> = find_boundary_loops(mesh)?
        .iter()
        .flat_map(|l| l.vertices.iter().map(|&v| mesh.vertices[v]))
        .collect();
    let margin = 2.0 * hole_radius;
    let border_grid = PointGrid::from_points(&border, margin.max(1e-12));
    let candidates = sample_points(mesh, 30.0 / (spacing * spacing), seed)?;
    let mut centers = PointGrid::new(spacing);
    // Sampling order is stratified per face; visit it in a seeded random order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for i in sample(&mut rng, candidates.len(), candidates.len()) {
        let p = candidates.points[i];
        if border_grid.any_closer(&p, margin) || centers.any_closer(&p, spacing) {
            continue;
        }
        centers.insert(p);
    }
    let centers: Vec<Vec3> = (0..centers.len()).map(|i| *centers.point(i)).collect();
    if centers.is_empty() {
        return Err(InpaintError::NoFacesLeft);
    }
    let cgrid = PointGrid::from_points(&centers, hole_radius);
    let removed: Vec<bool> = mesh.vertices.iter().map(|v| cgrid.any_closer(v, hole_radius)).collect();
    let faces: Vec<[usize; 3]> = mesh
        .faces
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&v| !removed[v]))
        .collect();
    if faces.is_empty() {
        return Err(InpaintError::NoFacesLeft);
    }
    let (damaged, vertex_map) = Mesh::new(mesh.vertices.clone(), faces)?.compact();
    let removed_vertices: Vec<usize> = (0..mesh.vertices.len()).filter(|&v| vertex_map[v].is_none()).collect();
    let record = HoleRecord {
        centers: centers.iter().map(|c| [c.x, c.y, c.z]).collect(),
        hole_radius,
        spacing,
        seed,
        removed_positions: removed_vertices.iter().map(|&v| mesh.vertices[v].into()).collect(),
        removed_vertices,
        vertex_map,
    };
    Ok((damaged, record))
}

/// Vertices whose coordinates are treated as unknown; connectivity is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedVertices {
    pub ratio: f64,
    pub seed: u64,
    /// Sorted indices of the missing vertices.
    pub missing: Vec<usize>,
    /// Their true positions, parallel to `missing`.
    pub truth: Vec<[f64; 3]>,
}

impl DroppedVertices {
    pub fn missing_mask(&self, vertex_count: usize) -> Vec<bool> {
        let mut m = vec![false; vertex_count];
        for &v in &self.missing {
            m[v] = true;
        }
        m
    }
}

/// Marks `floor(ratio · |V|)` vertices, chosen uniformly under `seed`,
/// as missing.
pub fn drop_vertices(mesh: &Mesh, ratio: f64, seed: u64) -> Result<DroppedVertices, InpaintError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(InpaintError::InvalidArgument(format!("ratio must be in (0, 1), got {ratio}")));
    }
    let n = mesh.vertices.len();
    let count = (ratio * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut missing = sample(&mut rng, n, count).into_vec();
    missing.sort_unstable();
    Ok(DroppedVertices {
        ratio,
        seed,
        truth: missing.iter().map(|&v| mesh.vertices[v].into()).collect(),
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::triangulate::hole_loops;
    use crate::shapes;

    #[test]
    fn punched_plane_has_round_interior_holes() {
        let m = shapes::plane_grid(100, 100, 1.0);
        let (d, rec) = punch_holes(&m, 0.03, 0.2, 7).unwrap();
        assert!(!rec.centers.is_empty());
        for (&v, p) in rec.removed_vertices.iter().zip(&rec.removed_positions) {
            assert_eq!(Vec3::from(*p), m.vertices[v]);
            let c = rec.centers.iter().map(|c| (Vec3::from(*c) - m.vertices[v]).norm()).fold(f64::INFINITY, f64::min);
            assert!(c < 0.03);
        }
        let holes = hole_loops(&d, Some(0.2)).unwrap();
        assert_eq!(holes.len(), rec.centers.len());
        assert_eq!(d.vertices.len() + rec.removed_vertices.len(), m.vertices.len());
    }

    #[test]
    fn punching_is_deterministic() {
        let m = shapes::plane_grid(40, 40, 1.0);
        let a = punch_holes(&m, 0.04, 0.2, 3).unwrap();
        let b = punch_holes(&m, 0.04, 0.2, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_holes_are_errors() {
        let m = shapes::plane_grid(4, 4, 1.0);
        assert!(punch_holes(&m, 5.0, 11.0, 0).is_err());
        assert!(punch_holes(&m, 0.1, 0.15, 0).is_err());
    }

    #[test]
    fn drop_half() {
        let m = shapes::plane_grid(9, 9, 1.0);
        let d = drop_vertices(&m, 0.5, 1).unwrap();
        assert_eq!(d.missing.len(), 50);
        assert_eq!(d, drop_vertices(&m, 0.5, 1).unwrap());
        assert_ne!(d.missing, drop_vertices(&m, 0.5, 2).unwrap().missing);
        assert!(drop_vertices(&m, 1.0, 1).is_err());
    }
}
