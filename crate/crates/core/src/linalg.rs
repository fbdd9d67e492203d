//! Dense linear-algebra helpers shared by the recovery and worst-case modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Absolute tolerance for orthonormality and annihilation residuals.
pub const ORTHO_TOL: f64 = 1e-10;
/// Largest condition number accepted for Gramian solves.
pub const COND_MAX: f64 = 1e12;
/// Relative tolerance on data-consistency residuals.
pub const SOLVE_TOL: f64 = 1e-9;

/// Matrices up to this order get an exact eigenvalue-based condition number;
/// larger ones fall back to the Cholesky diagonal ratio.
const EXACT_COND_LIMIT: usize = 600;

/// Largest and smallest singular values. The smallest is taken over
/// `min(rows, cols)` values and is 0 for an empty matrix.
pub fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    if a.nrows() == 0 || a.ncols() == 0 {
        return (0.0, 0.0);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Fails with `RankDeficient` unless `a` has full column rank
/// (`sigma_min > RANK_TOL * sigma_max`).
pub fn require_full_column_rank(a: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if a.ncols() == 0 {
        return Ok(());
    }
    if a.ncols() > a.nrows() {
        return Err(Error::RankDeficient {
            what,
            sigma_min: 0.0,
            tolerance: 0.0,
        });
    }
    let (max, min) = singular_extremes(a);
    let tolerance = RANK_TOL * max;
    if !(min > tolerance) {
        return Err(Error::RankDeficient {
            what,
            sigma_min: min,
            tolerance,
        });
    }
    Ok(())
}

/// Column-orthonormal basis of `span(a)` (thin Householder QR). Requires full column rank.
pub fn orthonormal_columns(a: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), 0));
    }
    require_full_column_rank(a, what)?;
    Ok(a.clone().qr().q())
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending. Ties keep
/// the solver's order, so repeated calls are bit-identical.
pub fn sym_eigen_sorted(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Cholesky factor of a symmetric positive-definite matrix with a condition check.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    condition: f64,
    jittered: bool,
}

impl SpdFactor {
    /// Factors `a`. If the plain factorization fails, retries once with
    /// `1e-12 * trace(a) / n` added to the diagonal.
    pub fn new(a: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: n,
                found: a.ncols(),
            });
        }
        let sym = (a + a.transpose()) * 0.5;
        let (chol, jittered) = match Cholesky::new(sym.clone()) {
            Some(c) => (c, false),
            None => {
                let jitter = 1e-12 * sym.trace().abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
                let shifted = &sym + DMatrix::identity(n, n) * jitter;
                match Cholesky::new(shifted) {
                    Some(c) => (c, true),
                    None => {
                        return Err(Error::IllConditioned {
                            what,
                            condition: f64::INFINITY,
                            limit: COND_MAX,
                        })
                    }
                }
            }
        };
        let condition = if n == 0 {
            1.0
        } else if n <= EXACT_COND_LIMIT {
            let eig = sym.symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        } else {
            let l = chol.l_dirty();
            let diag = l.diagonal();
            let max = diag.iter().cloned().fold(0.0, f64::max);
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            (max / min).powi(2)
        };
        if !(condition <= COND_MAX) {
            return Err(Error::IllConditioned {
                what,
                condition,
                limit: COND_MAX,
            });
        }
        Ok(Self {
            chol,
            condition,
            jittered,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Whether the diagonal shift had to be applied.
    pub fn jittered(&self) -> bool {
        self.jittered
    }
}

/// Minimum-norm least-squares solution of `a x = b` via SVD with relative
/// cutoff `RANK_TOL`.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (RANK_TOL * max).max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Column-stacks a list of vectors.
pub fn stack_columns(vs: &[DVector<f64>], nrows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, vs.len());
    for (j, v) in vs.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}
