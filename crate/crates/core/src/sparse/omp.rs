use nalgebra::{DMatrix, DVector};

use super::{BinMask, Dictionary, SparseError};

/// Residual norm below which pursuit stops early.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// `x ≈ Σ coefficients[i] · atom[support[i]]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// L2 norm of the (observed part of the) coded signal.
    pub target_norm: f64,
    /// L2 norm of the (observed part of the) residual.
    pub residual_norm: f64,
}

impl SparseCode {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Full-length estimate `D y`.
    pub fn expand(&self, d: &Dictionary) -> DVector<f64> {
        let mut out = DVector::zeros(d.m());
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            out.axpy(c, &d.atoms().column(j), 1.0);
        }
        out
    }

    pub fn coefficient_of(&self, atom: usize) -> Option<f64> {
        self.support.iter().position(|&j| j == atom).map(|i| self.coefficients[i])
    }
}

fn check_k(k: usize, d: &Dictionary, rows: usize) -> Result<(), SparseError> {
    let max = rows.min(d.p());
    if k == 0 || k > d.m().min(d.p()) {
        return Err(SparseError::InvalidSparsity { k, max: d.m().min(d.p()) });
    }
    if k > max {
        return Err(SparseError::TooFewObserved { observed: rows, k });
    }
    Ok(())
}

/// Orthogonal matching pursuit: greedily adds the atom with the largest
/// normalized correlation with the residual (ties go to the lowest index),
/// refits all coefficients by least squares, and stops after `k` atoms or
/// when the residual norm drops below [`RESIDUAL_TOLERANCE`].
pub fn omp_encode(x: &[f64], d: &Dictionary, k: usize) -> Result<SparseCode, SparseError> {
    if x.len() != d.m() {
        return Err(SparseError::DimensionMismatch {
            expected: d.m(),
            found: x.len(),
        });
    }
    check_k(k, d, d.m())?;
    let xo = DVector::from_column_slice(x);
    Ok(pursuit(&xo, d.atoms(), k))
}

/// OMP restricted to the observed rows: atoms are renormalized on those
/// rows for selection and coefficients come from least squares on them.
/// Values at unobserved positions are never read. An all-true mask gives
/// exactly the [`omp_encode`] result.
pub fn masked_omp_encode(x: &[f64], mask: &BinMask, d: &Dictionary, k: usize) -> Result<SparseCode, SparseError> {
    if x.len() != d.m() || mask.len() != d.m() {
        return Err(SparseError::DimensionMismatch {
            expected: d.m(),
            found: if x.len() != d.m() { x.len() } else { mask.len() },
        });
    }
    let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if rows.is_empty() {
        return Err(SparseError::EmptyMask);
    }
    check_k(k, d, rows.len())?;
    if rows.len() == d.m() {
        return omp_encode(x, d, k);
    }
    let xo = DVector::from_iterator(rows.len(), rows.iter().map(|&i| x[i]));
    let dobs = d.atoms().select_rows(&rows);
    Ok(pursuit(&xo, &dobs, k))
}

/// Pursuit on an explicit (row-restricted) system. Uses incremental
/// Gram-Schmidt with one re-orthogonalization pass.
pub(crate) fn pursuit(x: &DVector<f64>, d: &DMatrix<f64>, k: usize) -> SparseCode {
    let p = d.ncols();
    let target_norm = x.norm();
    let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    let mut usable: Vec<bool> = norms.iter().map(|&n| n > 1e-12).collect();
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(k);
    // Upper-triangular factor, column by column: r[c][i] = <q_i, d_support[c]>.
    let mut rcols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut qtx: Vec<f64> = Vec::with_capacity(k);
    let mut residual = x.clone();

    while support.len() < k && residual.norm() >= RESIDUAL_TOLERANCE {
        let corr = d.tr_mul(&residual);
        let mut best = None;
        let mut best_val = 0.0;
        for j in 0..p {
            if !usable[j] {
                continue;
            }
            let v = corr[j].abs() / norms[j];
            if v > best_val {
                best_val = v;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        let col = d.column(j).into_owned();
        let mut w = col.clone();
        let mut coeffs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&w);
                coeffs[i] += c;
                w.axpy(-c, qi, 1.0);
            }
        }
        let wn = w.norm();
        usable[j] = false;
        if wn <= 1e-10 * norms[j] {
            // Numerically in the span of the current support.
            continue;
        }
        w /= wn;
        coeffs.push(wn);
        let z = w.dot(x);
        residual.axpy(-w.dot(&residual), &w, 1.0);
        q.push(w);
        rcols.push(coeffs);
        qtx.push(z);
        support.push(j);
    }

    // Back substitution R c = Q^T x.
    let s = support.len();
    let mut coef = vec![0.0; s];
    for i in (0..s).rev() {
        let mut v = qtx[i];
        for c in i + 1..s {
            v -= rcols[c][i] * coef[c];
        }
        coef[i] = v / rcols[i][i];
    }
    let mut fit = x.clone();
    for (&j, &c) in support.iter().zip(&coef) {
        fit.axpy(-c, &d.column(j), 1.0);
    }
    SparseCode {
        support,
        coefficients: coef,
        target_norm,
        residual_norm: fit.norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DictMeta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dict(m: usize, p: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
        Dictionary::from_columns(a, DictMeta::default()).unwrap()
    }

    #[test]
    fn recovers_scaled_atom() {
        let d = random_dict(16, 10, 1);
        let x: Vec<f64> = d.atoms().column(5).iter().map(|v| 3.0 * v).collect();
        let c = omp_encode(&x, &d, 1).unwrap();
        assert_eq!(c.support, vec![5]);
        assert!((c.coefficients[0] - 3.0).abs() < 1e-12);
        assert!(c.residual_norm < 1e-12);
    }

    #[test]
    fn zero_signal_has_empty_support() {
        let d = random_dict(8, 6, 2);
        let c = omp_encode(&[0.0; 8], &d, 3).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.residual_norm, 0.0);
    }

    #[test]
    fn greedy_not_worse_than_any_single_atom() {
        let d = random_dict(8, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = omp_encode(&x, &d, 2).unwrap();
            let xv = DVector::from_column_slice(&x);
            for j in 0..6 {
                let a = d.atoms().column(j);
                let r = (&xv - a * a.dot(&xv)).norm();
                assert!(c.residual_norm <= r + 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let d = random_dict(8, 6, 5);
        assert!(matches!(omp_encode(&[0.0; 7], &d, 1), Err(SparseError::DimensionMismatch { .. })));
        assert!(matches!(omp_encode(&[0.0; 8], &d, 0), Err(SparseError::InvalidSparsity { .. })));
        assert!(matches!(omp_encode(&[0.0; 8], &d, 7), Err(SparseError::InvalidSparsity { .. })));
        let mut mask = [false; 8];
        assert!(matches!(masked_omp_encode(&[0.0; 8], &mask, &d, 1), Err(SparseError::EmptyMask)));
        mask[0] = true;
        assert!(matches!(
            masked_omp_encode(&[0.0; 8], &mask, &d, 2),
            Err(SparseError::TooFewObserved { observed: 1, k: 2 })
        ));
    }

    #[test]
    fn masked_recovers_hidden_atom() {
        let d = random_dict(64, 30, 6);
        let x: Vec<f64> = d.atoms().column(2).iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mask: Vec<bool> = (0..64).map(|_| rng.random::<f64>() >= 0.3).collect();
        let c = masked_omp_encode(&x, &mask, &d, 1).unwrap();
        assert_eq!(c.support, vec![2]);
        assert!((c.coefficients[0] - 1.0).abs() < 1e-6);
        let full = c.expand(&d);
        for i in 0..64 {
            assert!((full[i] - x[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn residual_non_increasing_in_k() {
        let d = random_dict(16, 12, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=12 {
            let c = omp_encode(&x, &d, k).unwrap();
            assert!(c.len() <= k);
            assert!(c.residual_norm <= prev + 1e-12);
            prev = c.residual_norm;
        }
    }
}
