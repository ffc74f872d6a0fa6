use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grid_side, BinState, ConnMap, Patch, PatchDataset, PatchError, RejectedFrame, Rejection};
use crate::frames::PatchFrame;
use crate::geom::Vec3;
use crate::mesh::{Mesh, PointCloud};
use crate::spatial::PointGrid;

/// Patch radius, resolution and rejection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchParams {
    pub radius: f64,
    pub resolution: usize,
    /// Reject when more than this fraction of the bins centred inside the
    /// inscribed disk are empty.
    pub max_empty_disk_fraction: f64,
    /// Reject when a bin's samples span more than this fraction of `r` in
    /// height (the ball caught two layers of surface).
    pub max_z_range_fraction: f64,
}

impl PatchParams {
    pub fn new(radius: f64, resolution: usize) -> Self {
        Self {
            radius,
            resolution,
            max_empty_disk_fraction: 0.4,
            max_z_range_fraction: 0.25,
        }
    }

    pub fn validate(&self) -> Result<(), PatchError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(PatchError::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        if self.resolution < 2 {
            return Err(PatchError::InvalidArgument(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn bin_size(&self) -> f64 {
        super::bin_size(self.radius, self.resolution)
    }
}

/// Bin of a point given in local frame coordinates, or `None` if it lies
/// outside the r-ball or the grid.
#[inline]
pub fn bin_of_local(local: &Vec3, radius: f64, resolution: usize) -> Option<usize> {
    if local.norm_squared() > radius * radius {
        return None;
    }
    let side = grid_side(radius);
    let h = side / resolution as f64;
    let half = 0.5 * side;
    let col = ((local.x + half) / h).floor();
    let row = ((local.y + half) / h).floor();
    let n = resolution as f64;
    if col < 0.0 || row < 0.0 || col >= n || row >= n {
        return None;
    }
    Some(row as usize * resolution + col as usize)
}

/// A point cloud with a hash grid for r-ball queries.
pub struct CloudIndex<'a> {
    pub cloud: &'a PointCloud,
    grid: PointGrid,
}

impl<'a> CloudIndex<'a> {
    pub fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        Self {
            cloud,
            grid: PointGrid::from_points(&cloud.points, cell),
        }
    }

    pub fn ball(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        self.grid.within(center, radius)
    }
}

fn extract_from(
    cloud: &PointCloud,
    candidates: &[usize],
    frame: &PatchFrame,
    params: &PatchParams,
    scaffold: Option<&[bool]>,
) -> Result<Patch, Rejection> {
    let n = params.resolution;
    let r = params.radius;
    let m = n * n;
    let mut sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    let mut flagged = vec![0usize; m];
    let mut zmin = vec![f64::INFINITY; m];
    let mut zmax = vec![f64::NEG_INFINITY; m];
    for &i in candidates {
        let local = frame.to_local(&cloud.points[i]);
        if let Some(b) = bin_of_local(&local, r, n) {
            sum[b] += local.z;
            count[b] += 1;
            zmin[b] = zmin[b].min(local.z);
            zmax[b] = zmax[b].max(local.z);
            if let Some(flags) = scaffold {
                let f = cloud.faces[i];
                if f < flags.len() && flags[f] {
                    flagged[b] += 1;
                }
            }
        }
    }
    let max_range = params.max_z_range_fraction * r;
    for b in 0..m {
        if count[b] > 0 && zmax[b] - zmin[b] > max_range {
            return Err(Rejection::MultiLayer {
                bin: b,
                range: zmax[b] - zmin[b],
            });
        }
    }
    let disk = 0.5 * grid_side(r);
    let (mut in_disk, mut empty) = (0usize, 0usize);
    for b in 0..m {
        let (x, y) = super::bin_center(r, n, b);
        if x * x + y * y <= disk * disk {
            in_disk += 1;
            if count[b] == 0 {
                empty += 1;
            }
        }
    }
    let frac = empty as f64 / in_disk.max(1) as f64;
    if frac > params.max_empty_disk_fraction {
        return Err(Rejection::EmptyDisk(frac));
    }
    let mut heights = vec![0.0; m];
    let mut mask = vec![BinState::Invalid; m];
    for b in 0..m {
        if count[b] > 0 {
            heights[b] = sum[b] / count[b] as f64;
            mask[b] = if 2 * flagged[b] > count[b] {
                BinState::Hole
            } else {
                BinState::Valid
            };
        }
    }
    Ok(Patch {
        heights,
        mask,
        frame: *frame,
        radius: r,
        resolution: n,
    })
}

/// Bins the cloud points of the r-ball around `frame.seed` into an `N × N`
/// height map (mean local height per bin; empty bins are invalid).
pub fn extract_patch(cloud: &PointCloud, frame: &PatchFrame, params: &PatchParams) -> Result<Patch, PatchError> {
    extract_patch_labeled(cloud, frame, params, &[])
}

/// Like [`extract_patch`]; bins whose samples come mostly from faces flagged
/// in `scaffold` (indexed by source face) are marked as holes.
pub fn extract_patch_labeled(
    cloud: &PointCloud,
    frame: &PatchFrame,
    params: &PatchParams,
    scaffold: &[bool],
) -> Result<Patch, PatchError> {
    params.validate()?;
    let r2 = params.radius * params.radius;
    let candidates: Vec<usize> = (0..cloud.len())
        .filter(|&i| (cloud.points[i] - frame.seed).norm_squared() <= r2)
        .collect();
    let flags = (!scaffold.is_empty()).then_some(scaffold);
    extract_from(cloud, &candidates, frame, params, flags).map_err(PatchError::InvalidPatch)
}

/// One patch per accepted frame. With a mesh, also records for every mesh
/// vertex the `(patch, bin)` cells it falls into, binned exactly like a
/// sample point. Rejected frames are listed in the provenance.
pub fn extract_dataset(
    cloud: &PointCloud,
    frames: &[PatchFrame],
    params: &PatchParams,
    mesh: Option<&Mesh>,
    scaffold: Option<&[bool]>,
) -> Result<PatchDataset, PatchError> {
    params.validate()?;
    let mut ds = PatchDataset::new(params.resolution, params.radius);
    let index = CloudIndex::new(cloud, params.radius);
    let results: Vec<Result<Patch, Rejection>> = frames
        .par_iter()
        .map(|f| {
            let candidates = index.ball(&f.seed, params.radius);
            extract_from(cloud, &candidates, f, params, scaffold)
        })
        .collect();
    for (f, res) in frames.iter().zip(results) {
        match res {
            Ok(p) => ds.patches.push(p),
            Err(reason) => ds.provenance.rejected.push(RejectedFrame {
                quad_id: f.quad_id,
                offset_id: f.offset_id,
                reason,
            }),
        }
    }
    if !ds.provenance.rejected.is_empty() {
        log::info!("{} of {} frames rejected", ds.provenance.rejected.len(), frames.len());
    }
    if let Some(mesh) = mesh {
        ds.conn = Some(build_conn(mesh, &ds.patches, params));
    }
    Ok(ds)
}

fn build_conn(mesh: &Mesh, patches: &[Patch], params: &PatchParams) -> ConnMap {
    let grid = PointGrid::from_points(&mesh.vertices, params.radius);
    let hits: Vec<Vec<(usize, u32)>> = patches
        .par_iter()
        .map(|p| {
            grid.within(&p.frame.seed, params.radius)
                .into_iter()
                .filter_map(|v| {
                    let local = p.frame.to_local(&mesh.vertices[v]);
                    bin_of_local(&local, params.radius, params.resolution).map(|b| (v, b as u32))
                })
                .collect()
        })
        .collect();
    let mut entries = vec![Vec::new(); mesh.vertices.len()];
    for (pi, list) in hits.into_iter().enumerate() {
        for (v, b) in list {
            entries[v].push((pi as u32, b));
        }
    }
    ConnMap {
        entries,
        faces: mesh.faces.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sample_points;
    use crate::shapes;

    fn flat_frame(seed: Vec3) -> PatchFrame {
        PatchFrame::from_axes(seed, Vec3::x(), Vec3::y(), Vec3::z(), 0, 0)
    }

    fn dense_plane() -> PointCloud {
        let m = shapes::plane_grid(4, 4, 1.0);
        sample_points(&m, 200_000.0, 1).unwrap()
    }

    #[test]
    fn plane_through_seed_is_flat() {
        let c = dense_plane();
        let p = extract_patch(&c, &flat_frame(Vec3::zeros()), &PatchParams::new(0.1, 16)).unwrap();
        assert!(p.valid_count() > 200);
        for b in 0..p.len() {
            if p.is_valid(b) {
                assert!(p.heights[b].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn offset_seed_gives_constant_height() {
        let c = dense_plane();
        let p = extract_patch(&c, &flat_frame(Vec3::new(0.0, 0.0, -0.1)), &PatchParams::new(0.3, 16)).unwrap();
        for b in 0..p.len() {
            if p.is_valid(b) {
                assert!((p.heights[b] - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_layers_are_rejected() {
        let r = 0.1;
        let mut a = shapes::plane_grid(4, 4, 1.0);
        let b = a.map_vertices(|p| p + Vec3::new(0.0, 0.0, 0.4 * r));
        let off = a.vertices.len();
        a.vertices.extend(b.vertices);
        a.faces.extend(b.faces.iter().map(|f| f.map(|i| i + off)));
        let c = sample_points(&a, 200_000.0, 2).unwrap();
        let res = extract_patch(&c, &flat_frame(Vec3::new(0.0, 0.0, 0.2 * r)), &PatchParams::new(r, 16));
        assert!(matches!(res, Err(PatchError::InvalidPatch(Rejection::MultiLayer { .. }))));
    }

    #[test]
    fn edge_of_surface_is_rejected() {
        let c = dense_plane();
        // Seed at a corner: three quarters of the disk sees nothing.
        let res = extract_patch(&c, &flat_frame(Vec3::new(0.5, 0.5, 0.0)), &PatchParams::new(0.1, 16));
        assert!(matches!(res, Err(PatchError::InvalidPatch(Rejection::EmptyDisk(_)))));
    }

    #[test]
    fn binning_is_half_open() {
        let r = 1.0 / std::f64::consts::SQRT_2;
        // Side 1, N = 2.
        assert_eq!(bin_of_local(&Vec3::new(-0.5, -0.4, 0.0), r, 2), Some(0));
        assert_eq!(bin_of_local(&Vec3::new(0.0, -0.25, 0.0), r, 2), Some(1));
        assert_eq!(bin_of_local(&Vec3::new(0.5, 0.0, 0.0), r, 2), None);
        assert_eq!(bin_of_local(&Vec3::new(0.0, 0.0, 0.8), r, 2), None);
    }

    #[test]
    fn dataset_covers_grid_vertices() {
        let m = shapes::plane_grid(20, 20, 1.0);
        let c = sample_points(&m, 100_000.0, 3).unwrap();
        let q = shapes::plane_quads(10, 1.0);
        let frames = crate::frames::orient_frames(&q).unwrap();
        // Generous radius so boundary patches survive the disk test.
        let mut params = PatchParams::new(0.1, 16);
        params.max_empty_disk_fraction = 0.8;
        let ds = extract_dataset(&c, &frames, &params, Some(&m), None).unwrap();
        assert_eq!(ds.len(), frames.len());
        let conn = ds.conn.as_ref().unwrap();
        assert_eq!(conn.vertex_count(), m.vertices.len());
        assert_eq!(conn.covered(), m.vertices.len());
        for e in &conn.entries {
            for &(p, b) in e {
                assert!((p as usize) < ds.len() && (b as usize) < 256);
            }
        }
    }

    #[test]
    fn empty_frame_list() {
        let c = dense_plane();
        let ds = extract_dataset(&c, &[], &PatchParams::new(0.1, 16), None, None).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn scaffold_bins_become_holes() {
        let m = shapes::plane_grid(2, 2, 1.0);
        let c = sample_points(&m, 100_000.0, 4).unwrap();
        // Flag the faces of the quad in the +x,+y corner.
        let mut flags = vec![false; m.faces.len()];
        flags[6] = true;
        flags[7] = true;
        let p = extract_patch_labeled(&c, &flat_frame(Vec3::zeros()), &PatchParams::new(0.2, 8), &flags).unwrap();
        for b in 0..p.len() {
            let (x, y) = p.bin_center(b);
            if p.mask[b] != BinState::Invalid {
                let expect = if x > 0.0 && y > 0.0 { BinState::Hole } else { BinState::Valid };
                assert_eq!(p.mask[b], expect, "bin {b}");
            }
        }
        assert_eq!(p.count(BinState::Hole), 16);
    }
}
