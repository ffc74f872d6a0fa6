use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::omp::pursuit;
use super::{DictMeta, Dictionary, SparseCode, SparseError};
use crate::patch::{fill_by_neighbour_mean, BinState, PatchDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdOptions {
    pub atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Alternating power steps per rank-1 atom update.
    pub power_steps: usize,
}

impl KsvdOptions {
    pub fn new(atoms: usize, sparsity: usize, iterations: usize, seed: u64) -> Self {
        Self {
            atoms,
            sparsity,
            iterations,
            seed,
            power_steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KsvdReport {
    /// `Σ ‖M(x − D y)‖²` after every iteration.
    pub objective: Vec<f64>,
    pub replaced_atoms: usize,
    pub codes: Vec<SparseCode>,
}

/// Signals (columns) and observation masks for dictionary training. Gap
/// bins are filled from their valid neighbours and count as observed; hole
/// bins are unobserved. The mask is `None` when nothing is unobserved.
pub fn training_signals(ds: &PatchDataset) -> (DMatrix<f64>, Option<Vec<Vec<bool>>>) {
    let m = ds.dim();
    let mut x = DMatrix::zeros(m, ds.len());
    let mut masks = Vec::with_capacity(ds.len());
    let mut any_hidden = false;
    for (i, p) in ds.patches.iter().enumerate() {
        let known: Vec<bool> = p.mask.iter().map(|&s| s == BinState::Valid).collect();
        let filled = fill_by_neighbour_mean(&p.heights, &known, ds.resolution);
        x.column_mut(i).copy_from_slice(&filled);
        let obs: Vec<bool> = p.mask.iter().map(|&s| s != BinState::Hole).collect();
        any_hidden |= obs.iter().any(|&o| !o);
        masks.push(obs);
    }
    (x, any_hidden.then_some(masks))
}

/// KSVD on the patches of a dataset (see [`training_signals`]).
pub fn ksvd_learn_dataset(ds: &PatchDataset, opts: &KsvdOptions) -> Result<(Dictionary, KsvdReport), SparseError> {
    let (x, masks) = training_signals(ds);
    let (mut d, rep) = ksvd_learn(&x, masks.as_deref(), opts)?;
    d.meta.resolution = Some(ds.resolution);
    d.meta.radius = Some(ds.radius);
    if !ds.provenance.source.is_empty() {
        d.meta.sources.push(ds.provenance.source.clone());
    }
    Ok((d, rep))
}

/// KSVD dictionary learning with an L0 constraint.
///
/// Atoms start as `p` distinct random nonzero training signals, normalized.
/// Each iteration sparse-codes every signal (keeping its previous code if
/// that one fits better under the current dictionary), then updates each
/// atom and its coefficients as the best rank-1 fit of the residual it
/// explains. Atoms nobody uses are replaced by the worst-fit signal.
/// The objective never increases from one iteration to the next.
///
/// `x` holds one signal per column. With `masks`, only observed entries
/// enter the objective.
pub fn ksvd_learn(
    x: &DMatrix<f64>,
    masks: Option<&[Vec<bool>]>,
    opts: &KsvdOptions,
) -> Result<(Dictionary, KsvdReport), SparseError> {
    let (m, n) = (x.nrows(), x.ncols());
    let p = opts.atoms;
    if let Some(ms) = masks {
        if ms.len() != n || ms.iter().any(|v| v.len() != m) {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: ms.len(),
            });
        }
    }
    if p == 0 || n < p {
        return Err(SparseError::NotEnoughSignals { n, p });
    }
    if opts.sparsity == 0 || opts.sparsity > m.min(p) {
        return Err(SparseError::InvalidSparsity {
            k: opts.sparsity,
            max: m.min(p),
        });
    }
    let observed = |i: usize| -> Option<&[bool]> { masks.map(|ms| ms[i].as_slice()) };
    let masked_signal = |i: usize| -> DVector<f64> {
        let mut c = x.column(i).into_owned();
        if let Some(mask) = observed(i) {
            for (v, &o) in c.iter_mut().zip(mask) {
                if !o {
                    *v = 0.0;
                }
            }
        }
        c
    };

    let nonzero: Vec<usize> = (0..n).filter(|&i| masked_signal(i).norm() > 1e-12).collect();
    if nonzero.is_empty() {
        return Err(SparseError::DegenerateData);
    }
    if nonzero.len() < p {
        return Err(SparseError::NotEnoughSignals { n: nonzero.len(), p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picks = sample(&mut rng, nonzero.len(), p).into_vec();
    picks.sort_unstable();
    let mut atoms = DMatrix::zeros(m, p);
    for (j, &pi) in picks.iter().enumerate() {
        let s = masked_signal(nonzero[pi]);
        atoms.set_column(j, &(&s / s.norm()));
    }
    let meta = DictMeta {
        sparsity: opts.sparsity,
        iterations: opts.iterations,
        seed: opts.seed,
        masked_training: masks.is_some(),
        ..DictMeta::default()
    };
    let mut dict = Dictionary::new(atoms, meta)?;
    let mut report = KsvdReport::default();
    let mut codes: Vec<SparseCode> = vec![SparseCode::default(); n];
    let mut residuals: Vec<DVector<f64>> = (0..n).map(masked_signal).collect();
    let mut have_codes = false;

    for _ in 0..opts.iterations {
        // Coding pass.
        let d = dict.atoms();
        let fresh: Vec<(SparseCode, DVector<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (code, res) = code_signal(x, i, observed(i), d, opts.sparsity);
                if have_codes && residuals[i].norm_squared() <= res.norm_squared() {
                    (codes[i].clone(), residuals[i].clone())
                } else {
                    (code, res)
                }
            })
            .collect();
        for (i, (c, r)) in fresh.into_iter().enumerate() {
            codes[i] = c;
            residuals[i] = r;
        }
        have_codes = true;

        // Atom updates.
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
        for (i, c) in codes.iter().enumerate() {
            for (slot, &j) in c.support.iter().enumerate() {
                users[j].push((i, slot));
            }
        }
        let mut replaced: Vec<usize> = Vec::new();
        for j in 0..p {
            if users[j].is_empty() {
                // Worst-fit signal not already used as a replacement.
                let worst = (0..n)
                    .filter(|i| !replaced.contains(i))
                    .max_by(|&a, &b| residuals[a].norm_squared().total_cmp(&residuals[b].norm_squared()).then(b.cmp(&a)));
                if let Some(w) = worst {
                    let s = masked_signal(w);
                    let nrm = s.norm();
                    if nrm > 1e-12 {
                        dict.atoms_mut().set_column(j, &(&s / nrm));
                        replaced.push(w);
                        report.replaced_atoms += 1;
                    }
                }
                continue;
            }
            update_atom(&mut dict, j, &users[j], &mut codes, &mut residuals, masks, opts.power_steps);
        }
        let obj: f64 = residuals.iter().map(|r| r.norm_squared()).sum();
        log::debug!("ksvd objective {obj:.6e}");
        report.objective.push(obj);
    }
    dict.meta.objective = report.objective.clone();
    report.codes = codes;
    Ok((dict, report))
}

/// Codes signal `i` and returns the code with its residual (zero at
/// unobserved rows).
fn code_signal(
    x: &DMatrix<f64>,
    i: usize,
    mask: Option<&[bool]>,
    d: &DMatrix<f64>,
    k: usize,
) -> (SparseCode, DVector<f64>) {
    let m = x.nrows();
    let rows: Vec<usize> = match mask {
        Some(mk) => (0..m).filter(|&r| mk[r]).collect(),
        None => (0..m).collect(),
    };
    let code = if rows.len() == m {
        pursuit(&x.column(i).into_owned(), d, k)
    } else if rows.is_empty() {
        SparseCode::default()
    } else {
        let xo = DVector::from_iterator(rows.len(), rows.iter().map(|&r| x[(r, i)]));
        pursuit(&xo, &d.select_rows(&rows), k.min(rows.len()))
    };
    let mut res = DVector::zeros(m);
    for &r in &rows {
        let mut v = x[(r, i)];
        for (&j, &c) in code.support.iter().zip(&code.coefficients) {
            v -= c * d[(r, j)];
        }
        res[r] = v;
    }
    (code, res)
}

/// Best rank-1 refit `E ≈ d gᵀ` of the residual explained by atom `j`,
/// by alternating least squares started from the current atom and
/// coefficients (each half step is an exact minimization, so the error
/// cannot grow). Falls back to the old atom if rounding makes it worse.
fn update_atom(
    dict: &mut Dictionary,
    j: usize,
    users: &[(usize, usize)],
    codes: &mut [SparseCode],
    residuals: &mut [DVector<f64>],
    masks: Option<&[Vec<bool>]>,
    steps: usize,
) {
    let m = dict.m();
    let old_d = dict.atoms().column(j).into_owned();
    let old_g: Vec<f64> = users.iter().map(|&(i, s)| codes[i].coefficients[s]).collect();
    // E columns: residual with atom j's contribution added back.
    let e: Vec<DVector<f64>> = users
        .iter()
        .zip(&old_g)
        .map(|(&(i, _), &g)| {
            let mut c = residuals[i].clone();
            match masks {
                Some(ms) => {
                    for r in 0..m {
                        if ms[i][r] {
                            c[r] += g * old_d[r];
                        }
                    }
                }
                None => c.axpy(g, &old_d, 1.0),
            }
            c
        })
        .collect();
    let w = |u: usize, r: usize| -> bool { masks.is_none_or(|ms| ms[users[u].0][r]) };
    let err_of = |d: &DVector<f64>, g: &[f64]| -> f64 {
        let mut s = 0.0;
        for (u, ec) in e.iter().enumerate() {
            for r in 0..m {
                if w(u, r) {
                    let v = ec[r] - d[r] * g[u];
                    s += v * v;
                }
            }
        }
        s
    };
    let before = err_of(&old_d, &old_g);

    let mut d = old_d.clone();
    let mut g = old_g.clone();
    for _ in 0..steps {
        // g given d.
        for (u, ec) in e.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for r in 0..m {
                if w(u, r) {
                    num += ec[r] * d[r];
                    den += d[r] * d[r];
                }
            }
            g[u] = if den > 0.0 { num / den } else { 0.0 };
        }
        // d given g, row by row.
        let mut nd = d.clone();
        for r in 0..m {
            let (mut num, mut den) = (0.0, 0.0);
            for (u, ec) in e.iter().enumerate() {
                if w(u, r) {
                    num += ec[r] * g[u];
                    den += g[u] * g[u];
                }
            }
            if den > 0.0 {
                nd[r] = num / den;
            }
        }
        let nn = nd.norm();
        if !(nn > 1e-300) || !nn.is_finite() {
            break;
        }
        nd /= nn;
        for gu in &mut g {
            *gu *= nn;
        }
        d = nd;
    }
    let after = err_of(&d, &g);
    if !(after <= before) {
        return;
    }
    dict.atoms_mut().set_column(j, &d);
    for (u, &(i, slot)) in users.iter().enumerate() {
        codes[i].coefficients[slot] = g[u];
        let mut c = e[u].clone();
        for r in 0..m {
            if w(u, r) {
                c[r] -= g[u] * d[r];
            } else {
                c[r] = 0.0;
            }
        }
        residuals[i] = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn planted(m: usize, p: usize, n: usize, k: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
        for mut c in d.column_iter_mut() {
            let nn = c.norm();
            c /= nn;
        }
        let mut x = DMatrix::zeros(m, n);
        for i in 0..n {
            for j in sample(&mut rng, p, k).into_iter() {
                let mag = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let col = d.column(j).into_owned();
                x.column_mut(i).axpy(mag, &col, 1.0);
            }
        }
        (d, x)
    }

    #[test]
    fn zero_iterations_is_normalized_data() {
        let (_, x) = planted(10, 5, 40, 2, 1);
        let (d, rep) = ksvd_learn(&x, None, &KsvdOptions::new(5, 2, 0, 3)).unwrap();
        assert!(rep.objective.is_empty());
        for c in d.atoms().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
            let hit = x.column_iter().any(|s| (s / s.norm() - c).norm() < 1e-12);
            assert!(hit);
        }
    }

    #[test]
    fn objective_is_monotone_and_atoms_unit() {
        let (_, x) = planted(16, 12, 300, 3, 2);
        let (d, rep) = ksvd_learn(&x, None, &KsvdOptions::new(12, 3, 15, 4)).unwrap();
        for w in rep.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-8), "{} > {}", w[1], w[0]);
        }
        for c in d.atoms().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_training_is_monotone() {
        let (_, x) = planted(16, 8, 200, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let masks: Vec<Vec<bool>> = (0..200).map(|_| (0..16).map(|_| rng.random::<f64>() > 0.2).collect()).collect();
        let (_, rep) = ksvd_learn(&x, Some(&masks), &KsvdOptions::new(8, 2, 10, 7)).unwrap();
        for w in rep.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-8));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (_, x) = planted(12, 6, 100, 2, 8);
        let a = ksvd_learn(&x, None, &KsvdOptions::new(6, 2, 5, 1)).unwrap().0;
        let b = ksvd_learn(&x, None, &KsvdOptions::new(6, 2, 5, 1)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let x = DMatrix::zeros(4, 10);
        assert!(matches!(ksvd_learn(&x, None, &KsvdOptions::new(3, 1, 1, 0)), Err(SparseError::DegenerateData)));
        let x = DMatrix::from_element(4, 2, 1.0);
        assert!(matches!(
            ksvd_learn(&x, None, &KsvdOptions::new(3, 1, 1, 0)),
            Err(SparseError::NotEnoughSignals { n: 2, p: 3 })
        ));
    }
}
