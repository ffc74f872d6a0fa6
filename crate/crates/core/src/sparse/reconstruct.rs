use rayon::prelude::*;

use super::{masked_omp_encode, omp_encode, Dictionary, SparseCode, SparseError};
use crate::patch::{BinState, PatchDataset};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructionStats {
    /// Mean over patches of the residual norm on observed bins.
    pub mean_residual: f64,
    /// Mean over patches of the RMS residual per observed bin.
    pub mean_rms: f64,
    /// Patches coded with a partial mask.
    pub masked_patches: usize,
    /// Patches left untouched because no bin was valid.
    pub skipped_patches: usize,
    pub codes: Vec<Option<SparseCode>>,
}

/// Replaces every patch by its `k`-sparse approximation `D y`. Patches with
/// non-valid bins are coded on their valid bins only; the expansion then
/// defines every bin, and every bin of the output is valid. `k` is lowered
/// to the number of valid bins where needed.
pub fn reconstruct_patches(
    ds: &PatchDataset,
    d: &Dictionary,
    k: usize,
) -> Result<(PatchDataset, ReconstructionStats), SparseError> {
    d.check_dim(ds.dim())?;
    let results: Vec<Result<Option<(Vec<f64>, SparseCode, usize)>, SparseError>> = ds
        .patches
        .par_iter()
        .map(|p| {
            let mask = p.observed();
            let obs = mask.iter().filter(|&&o| o).count();
            if obs == 0 {
                return Ok(None);
            }
            let code = if obs == mask.len() {
                omp_encode(&p.heights, d, k)?
            } else {
                masked_omp_encode(&p.heights, &mask, d, k.min(obs))?
            };
            Ok(Some((code.expand(d).as_slice().to_vec(), code, obs)))
        })
        .collect();

    let mut out = ds.clone();
    let mut stats = ReconstructionStats::default();
    let mut coded = 0usize;
    for (patch, res) in out.patches.iter_mut().zip(results) {
        match res? {
            None => {
                stats.skipped_patches += 1;
                stats.codes.push(None);
            }
            Some((heights, code, obs)) => {
                if obs < patch.len() {
                    stats.masked_patches += 1;
                }
                stats.mean_residual += code.residual_norm;
                stats.mean_rms += code.residual_norm / (obs as f64).sqrt();
                coded += 1;
                patch.heights = heights;
                patch.mask = vec![BinState::Valid; patch.len()];
                stats.codes.push(Some(code));
            }
        }
    }
    if coded > 0 {
        stats.mean_residual /= coded as f64;
        stats.mean_rms /= coded as f64;
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::PatchFrame;
    use crate::geom::Vec3;
    use crate::patch::Patch;
    use crate::sparse::DictMeta;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(n: usize, p: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n * n, p, |_, _| rng.random_range(-1.0..1.0));
        Dictionary::from_columns(a, DictMeta::default()).unwrap()
    }

    fn dataset(n: usize, signals: Vec<Vec<f64>>) -> PatchDataset {
        let mut ds = PatchDataset::new(n, 0.1);
        let frame = PatchFrame::from_axes(Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), 0, 0);
        for h in signals {
            ds.patches.push(Patch {
                mask: vec![BinState::Valid; h.len()],
                heights: h,
                frame,
                radius: 0.1,
                resolution: n,
            });
        }
        ds
    }

    #[test]
    fn exact_atoms_are_reproduced() {
        let d = dict(4, 10, 1);
        let sig: Vec<Vec<f64>> = (0..10).map(|j| d.atoms().column(j).iter().map(|v| 0.7 * v).collect()).collect();
        let ds = dataset(4, sig);
        for k in [1, 3] {
            let (out, stats) = reconstruct_patches(&ds, &d, k).unwrap();
            for (a, b) in out.patches.iter().zip(&ds.patches) {
                for (x, y) in a.heights.iter().zip(&b.heights) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
            assert!(stats.mean_residual < 1e-9);
        }
    }

    #[test]
    fn residual_non_increasing_in_k() {
        let d = dict(6, 40, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig: Vec<Vec<f64>> = (0..20).map(|_| (0..36).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ds = dataset(6, sig);
        let mut prev = f64::INFINITY;
        for k in [1, 5, 20] {
            let r = reconstruct_patches(&ds, &d, k).unwrap().1.mean_residual;
            assert!(r <= prev + 1e-12);
            prev = r;
        }
    }

    #[test]
    fn half_holed_patch_is_fully_defined() {
        let d = dict(4, 8, 4);
        let mut ds = dataset(4, vec![d.atoms().column(3).iter().copied().collect()]);
        for b in 0..8 {
            ds.patches[0].mask[b] = BinState::Hole;
            ds.patches[0].heights[b] = f64::NAN;
        }
        let (out, stats) = reconstruct_patches(&ds, &d, 2).unwrap();
        assert_eq!(stats.masked_patches, 1);
        assert!(out.patches[0].heights.iter().all(|h| h.is_finite()));
        assert_eq!(out.patches[0].valid_count(), 16);
    }

    #[test]
    fn dimension_mismatch() {
        let d = dict(4, 8, 5);
        let ds = dataset(5, vec![vec![0.0; 25]]);
        assert!(matches!(reconstruct_patches(&ds, &d, 1), Err(SparseError::DimensionMismatch { .. })));
    }
}
