//! L-ensembles over caption sets: construction from quality and similarity,
//! log-determinants, the sign pattern of the (ridged) inverse, and exact DPP
//! subset probabilities on small ground sets.
//!
//! The derivative of `log det(L)` with respect to the entry `L_ij` is the
//! entry `(L^-1)_ij`. Its sign says whether increasing `L_ij` grows or shrinks
//! the log-determinant, which is what the R-DPP reward consumes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Ridge added before inverting a sampled-set kernel.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Inverse entries with magnitude at or below this are given sign 0.
pub const DEFAULT_SIGN_TOL: f64 = 1e-12;
/// Largest `|M - M^T|` entry tolerated by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Tolerated negative pivot, relative to the largest diagonal entry, before a
/// matrix is declared indefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Largest ground set [`dpp_log_prob`] will normalize over.
pub const MAX_GROUND_SET: usize = 15;

/// Sorted, distinct positions into a ground set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetIndex(Vec<usize>);

impl SubsetIndex {
    /// Validates that `indices` is strictly increasing and below `ground_size`.
    pub fn new(indices: Vec<usize>, ground_size: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape(format!(
                "subset indices {indices:?} are not strictly increasing"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= ground_size {
                return Err(Error::Shape(format!(
                    "subset index {last} out of bounds for ground set of {ground_size}"
                )));
            }
        }
        Ok(SubsetIndex(indices))
    }

    /// Subset selected by the set bits of `mask`.
    pub fn from_mask(mask: u64, ground_size: usize) -> Self {
        SubsetIndex((0..ground_size).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Principal submatrix of `m` on these indices.
    pub fn minor(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.0.len();
        DMatrix::from_fn(k, k, |r, c| m[(self.0[r], self.0[c])])
    }
}

/// `L_ij = q_i q_j S_ij`.
pub fn build_l(q: &[f64], s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = q.len();
    if s.nrows() != m || s.ncols() != m {
        return Err(Error::Shape(format!(
            "quality vector has {m} entries but similarity is {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| q[i] * q[j] * s[(i, j)]))
}

/// Largest `|M_ij - M_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL || asym.is_nan() {
        return Err(Error::Symmetry {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// `P M P^T = L D L^T` with diagonal pivoting (largest remaining diagonal first).
///
/// For positive semidefinite input the pivots come out non-increasing, so a
/// rank-deficient matrix shows up as a trailing run of (numerically) zero
/// pivots.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    lower: DMatrix<f64>,
    pivots: Vec<f64>,
    perm: Vec<usize>,
}

impl SymmetricFactor {
    /// Factors the lower triangle of `m`; the caller is responsible for symmetry.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut a = m.clone();
        let mut lower = DMatrix::<f64>::identity(n, n);
        let mut pivots = vec![0.0; n];
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]))
                .unwrap_or(k);
            if p != k {
                a.swap_rows(k, p);
                a.swap_columns(k, p);
                perm.swap(k, p);
                for c in 0..k {
                    lower.swap((k, c), (p, c));
                }
            }
            let d = a[(k, k)];
            pivots[k] = d;
            if d == 0.0 {
                // Remaining column is (numerically) zero for PSD input.
                continue;
            }
            for i in (k + 1)..n {
                lower[(i, k)] = a[(i, k)] / d;
            }
            for j in (k + 1)..n {
                let ljk = lower[(j, k)] * d;
                if ljk == 0.0 {
                    continue;
                }
                for i in j..n {
                    a[(i, j)] -= lower[(i, k)] * ljk;
                }
            }
            // Mirror the updated lower triangle so later pivots read it.
            for j in (k + 1)..n {
                for i in (j + 1)..n {
                    a[(j, i)] = a[(i, j)];
                }
            }
        }
        SymmetricFactor {
            lower,
            pivots,
            perm,
        }
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// `sum ln(d_k)`, `-inf` when a pivot is zero or negative.
    pub fn log_det(&self) -> f64 {
        let mut acc = 0.0;
        for &d in &self.pivots {
            if d <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += d.ln();
        }
        acc
    }

    /// Solves `M x = b`. Fails on a pivot that is not safely positive.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.pivots.len();
        let scale = self.pivots.iter().cloned().fold(0.0, f64::max);
        let floor = scale * n as f64 * f64::EPSILON;
        for (step, &d) in self.pivots.iter().enumerate() {
            if !(d > floor) {
                return Err(Error::Singularity { step, pivot: d });
            }
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lower[(i, j)] * y[j];
            }
            y[i] = acc;
        }
        for (yi, d) in y.iter_mut().zip(&self.pivots) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lower[(j, i)] * y[j];
            }
            y[i] = acc;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.pivots.len();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e)?;
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // Symmetrize to remove rounding asymmetry.
        Ok((&inv + inv.transpose()) * 0.5)
    }
}

fn ridged(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let mut r = m.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += eps;
    }
    r
}

/// `log det(M + eps I)` for a symmetric positive semidefinite `M`.
///
/// Returns `-inf` for singular input with `eps = 0`; errors on asymmetric or
/// clearly indefinite input.
pub fn log_det(m: &DMatrix<f64>, eps: f64) -> Result<f64> {
    check_symmetric(m)?;
    let r = ridged(m, eps);
    let factor = SymmetricFactor::new(&r);
    let scale = factor.pivots().iter().cloned().fold(0.0, f64::max).max(1.0);
    if let Some(&d) = factor.pivots().iter().find(|&&d| d < -PSD_TOL * scale) {
        return Err(Error::NotPositiveSemidefinite { pivot: d });
    }
    Ok(factor.log_det())
}

/// `(M + eps I)^-1` for a symmetric positive semidefinite `M`.
pub fn ridge_inverse(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    SymmetricFactor::new(&ridged(m, eps)).inverse()
}

/// Elementwise sign of `(L + eps I)^-1`, with `|x| <= tol` mapped to 0.
pub fn inverse_sign_matrix(l: &DMatrix<f64>, eps: f64, tol: f64) -> Result<DMatrix<i8>> {
    let inv = ridge_inverse(l, eps)?;
    Ok(sign_pattern(&inv, tol))
}

pub fn sign_pattern(m: &DMatrix<f64>, tol: f64) -> DMatrix<i8> {
    m.map(|x| {
        if x > tol {
            1
        } else if x < -tol {
            -1
        } else {
            0
        }
    })
}

/// `log P(X) = log det(L_X) - log det(L + I)` on an enumerable ground set.
pub fn dpp_log_prob(l_full: &DMatrix<f64>, subset: &SubsetIndex) -> Result<f64> {
    let n = l_full.nrows();
    if n > MAX_GROUND_SET {
        return Err(Error::Capacity {
            what: "DPP ground set",
            size: n as u128,
            limit: MAX_GROUND_SET as u128,
        });
    }
    if subset.indices().last().is_some_and(|&i| i >= n) {
        return Err(Error::Shape(format!(
            "subset {:?} does not fit a ground set of {n}",
            subset.indices()
        )));
    }
    let normalizer = log_det(l_full, 1.0)?;
    let numerator = if subset.is_empty() {
        0.0
    } else {
        log_det(&subset.minor(l_full), 0.0)?
    };
    Ok(numerator - normalizer)
}

/// Quality, similarity, kernel and inverse-sign pattern for one sampled set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMatrices {
    pub q: Vec<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub eps: f64,
    pub signs: DMatrix<i8>,
}

impl EnsembleMatrices {
    pub fn new(q: Vec<f64>, s: DMatrix<f64>, eps: f64, tol: f64) -> Result<Self> {
        let l = build_l(&q, &s)?;
        let signs = inverse_sign_matrix(&l, eps, tol)?;
        Ok(EnsembleMatrices { q, s, l, eps, signs })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `log det(L + eps I)`, the set-level objective R-DPP ascends.
    pub fn log_det(&self) -> Result<f64> {
        log_det(&self.l, self.eps)
    }
}
