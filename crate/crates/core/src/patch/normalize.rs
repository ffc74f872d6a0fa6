use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinState, PatchDataset, PatchError};

/// Upper end of the normalized height range; 1.0 is reserved for holes.
pub const NORMALIZED_MAX: f64 = 1.0 / 1.2;

/// Height range used to normalize a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub min: f64,
    pub max: f64,
}

impl NormRecord {
    #[inline]
    pub fn forward(&self, h: f64) -> f64 {
        (h - self.min) / (self.max - self.min) / 1.2
    }

    #[inline]
    pub fn inverse(&self, v: f64) -> f64 {
        v * 1.2 * (self.max - self.min) + self.min
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Maps valid heights affinely from `[min, max]` (over the whole dataset)
/// to `[0, 1/1.2]`; every invalid or hole bin is set to exactly 1.
pub fn normalize_patches(ds: &PatchDataset) -> Result<(PatchDataset, NormRecord), PatchError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for p in &ds.patches {
        for (h, s) in p.heights.iter().zip(&p.mask) {
            if *s == BinState::Valid {
                min = min.min(*h);
                max = max.max(*h);
            }
        }
    }
    if !min.is_finite() {
        return Err(PatchError::InvalidArgument("dataset has no valid bins".into()));
    }
    if max <= min {
        return Err(PatchError::DegenerateRange(min));
    }
    let rec = NormRecord { min, max };
    Ok((normalize_patches_with(ds, &rec), rec))
}

/// Normalization with a given record (for example one saved from another
/// dataset); invalid and hole bins become 1.
pub fn normalize_patches_with(ds: &PatchDataset, rec: &NormRecord) -> PatchDataset {
    let mut out = ds.clone();
    for p in &mut out.patches {
        for (h, s) in p.heights.iter_mut().zip(&p.mask) {
            *h = if *s == BinState::Valid { rec.forward(*h) } else { 1.0 };
        }
    }
    out
}

/// Inverse of [`normalize_patches`] on valid bins; other bins are left as
/// they are.
pub fn denormalize_patches(ds: &PatchDataset, rec: &NormRecord) -> PatchDataset {
    let mut out = ds.clone();
    for p in &mut out.patches {
        for (h, s) in p.heights.iter_mut().zip(&p.mask) {
            if *s == BinState::Valid {
                *h = rec.inverse(*h);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::PatchFrame;
    use crate::geom::Vec3;
    use crate::patch::Patch;

    fn dataset(heights: Vec<f64>, mask: Vec<BinState>) -> PatchDataset {
        let mut ds = PatchDataset::new(2, 0.1);
        ds.patches.push(Patch {
            heights,
            mask,
            frame: PatchFrame::from_axes(Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), 0, 0),
            radius: 0.1,
            resolution: 2,
        });
        ds
    }

    #[test]
    fn endpoints_and_holes() {
        use BinState::*;
        let ds = dataset(vec![-0.02, 0.04, 0.01, 7.0], vec![Valid, Valid, Valid, Hole]);
        let (n, rec) = normalize_patches(&ds).unwrap();
        let h = &n.patches[0].heights;
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], NORMALIZED_MAX);
        assert!((h[1] - 0.833_333_333_333_333_3).abs() < 1e-15);
        assert_eq!(h[3], 1.0);
        assert_eq!(rec, NormRecord { min: -0.02, max: 0.04 });
        let back = denormalize_patches(&n, &rec);
        for b in 0..3 {
            assert!((back.patches[0].heights[b] - ds.patches[0].heights[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_dataset_is_degenerate() {
        let ds = dataset(vec![0.5; 4], vec![BinState::Valid; 4]);
        assert!(matches!(normalize_patches(&ds), Err(PatchError::DegenerateRange(_))));
    }
}
