//! Gaussian-kernel RKHS instantiation.
//!
//! Representers of point evaluations are kernel sections `K(x_i, .)`, so the
//! Gramian is the kernel matrix and the cross-Gramian with a basis of `V` is
//! the matrix of basis-function values at the training points. `V` is spanned
//! by Taylor features `exp(-|x|^2 / 2 sigma^2) x^alpha`, `|alpha| <= k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::erm::erm2_gram;
use crate::error::{Error, Result};
use crate::recovery::{optimal_recover_gram, ridgeless_recover_gram};

/// Gaussian kernel `exp(-|x - x'|^2 / 2 sigma^2)` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    sigma: f64,
    dim: usize,
}

impl KernelSpec {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel width must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma, dim })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K(x, x')`, computed from the squared difference so that it equals 1
    /// exactly when `x == x'`.
    pub fn eval(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        for len in [x.len(), x_prime.len()] {
            if len != self.dim {
                return Err(Error::DimensionMismatch {
                    context: "kernel argument",
                    expected: self.dim,
                    found: len,
                });
            }
        }
        let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((-sq / (2.0 * self.sigma * self.sigma)).exp())
    }

    /// Kernel matrix between the rows of `a` and the rows of `b`, via
    /// `|x|^2 + |x'|^2 - 2 x.x'` with precomputed squared norms.
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        for cols in [a.ncols(), b.ncols()] {
            if cols != self.dim {
                return Err(Error::DimensionMismatch {
                    context: "kernel points",
                    expected: self.dim,
                    found: cols,
                });
            }
        }
        let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
        let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
        let dots = a * b.transpose();
        let scale = 1.0 / (2.0 * self.sigma * self.sigma);
        Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            let sq = (na[i] + nb[j] - 2.0 * dots[(i, j)]).max(0.0);
            (-sq * scale).exp()
        }))
    }
}

/// `K(x, x')` for a kernel spec.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    spec.eval(x, x_prime)
}

/// Kernel Gramian of a point set together with any coincident point pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram {
    pub matrix: DMatrix<f64>,
    /// Index pairs `(i, j)`, `i < j`, of identical points. Non-empty means
    /// the Gramian is singular.
    pub duplicates: Vec<(usize, usize)>,
}

impl KernelGram {
    pub fn is_singular(&self) -> bool {
        !self.duplicates.is_empty()
    }
}

/// Symmetric kernel Gramian with unit diagonal.
pub fn kernel_gram(spec: &KernelSpec, points: &DMatrix<f64>) -> Result<KernelGram> {
    if points.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut matrix = spec.cross(points, points)?;
    let m = points.nrows();
    let mut duplicates = Vec::new();
    for i in 0..m {
        matrix[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let avg = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = avg;
            matrix[(j, i)] = avg;
            if points.row(i) == points.row(j) {
                matrix[(i, j)] = 1.0;
                matrix[(j, i)] = 1.0;
                duplicates.push((i, j));
            }
        }
    }
    Ok(KernelGram { matrix, duplicates })
}

/// Multi-indices `|alpha| <= k` in graded order: by total degree, then
/// lexicographically descending (so `x_1` precedes `x_2`).
pub fn graded_multi_indices(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0u32; dim];
        push_with_total(&mut out, &mut current, 0, total as u32);
    }
    out
}

fn push_with_total(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        push_with_total(out, current, pos + 1, remaining - v);
    }
    current[pos] = 0;
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Basis of Taylor features spanning `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorBasisSpec {
    sigma: f64,
    dim: usize,
    degree: usize,
    multi_indices: Vec<Vec<u32>>,
    normalized: bool,
}

impl TaylorBasisSpec {
    /// All features of total degree `<= degree`, unnormalized.
    pub fn new(dim: usize, degree: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "feature width must be positive, got {sigma}"
            )));
        }
        let multi_indices = graded_multi_indices(dim, degree);
        debug_assert_eq!(multi_indices.len(), binomial(dim + degree, dim));
        Ok(Self {
            sigma,
            dim,
            degree,
            multi_indices,
            normalized: false,
        })
    }

    /// Includes the `sqrt(sigma^-2|alpha| / alpha!)` factors, which makes the
    /// features orthonormal in the RKHS.
    pub fn normalized(mut self, on: bool) -> Self {
        self.normalized = on;
        self
    }

    /// Keeps only the first `n` features in graded order.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.multi_indices.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.multi_indices.len(),
            });
        }
        Ok(Self {
            multi_indices: self.multi_indices[..n].to_vec(),
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.multi_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi_indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn multi_indices(&self) -> &[Vec<u32>] {
        &self.multi_indices
    }

    fn coefficient(&self, alpha: &[u32]) -> f64 {
        if !self.normalized {
            return 1.0;
        }
        let total: u32 = alpha.iter().sum();
        let factorials: f64 = alpha
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product();
        ((1.0 / (self.sigma * self.sigma)).powi(total as i32) / factorials).sqrt()
    }

    /// Value of feature `alpha_index` at `x`.
    pub fn eval(&self, alpha_index: usize, x: &[f64]) -> Result<f64> {
        let alpha = self
            .multi_indices
            .get(alpha_index)
            .ok_or(Error::IndexOutOfRange {
                index: alpha_index,
                len: self.multi_indices.len(),
            })?;
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "Taylor feature argument",
                expected: self.dim,
                found: x.len(),
            });
        }
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let envelope = (-sq / (2.0 * self.sigma * self.sigma)).exp();
        let monomial: f64 = x
            .iter()
            .zip(alpha)
            .map(|(v, &a)| v.powi(a as i32))
            .product();
        Ok(self.coefficient(alpha) * envelope * monomial)
    }
}

/// `phi_alpha(x)` for the feature at `alpha_index`.
pub fn taylor_feature_eval(basis: &TaylorBasisSpec, alpha_index: usize, x: &[f64]) -> Result<f64> {
    basis.eval(alpha_index, x)
}

/// Cross-Gramian `C_{ij} = v_j(x_i)`.
pub fn cross_gram(basis: &TaylorBasisSpec, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if points.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch {
            context: "cross-Gramian points",
            expected: basis.dim(),
            found: points.ncols(),
        });
    }
    let mut c = DMatrix::zeros(points.nrows(), basis.len());
    for i in 0..points.nrows() {
        let x: Vec<f64> = points.row(i).iter().cloned().collect();
        for j in 0..basis.len() {
            c[(i, j)] = basis.eval(j, &x)?;
        }
    }
    Ok(c)
}

/// `sum a_i K(x_i, .) + sum b_j v_j`, evaluable anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredFunction {
    pub points: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub a: DVector<f64>,
    pub basis: TaylorBasisSpec,
    pub b: DVector<f64>,
}

impl RecoveredFunction {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..self.points.nrows() {
            let xi: Vec<f64> = self.points.row(i).iter().cloned().collect();
            acc += self.a[i] * self.kernel.eval(&xi, x)?;
        }
        for j in 0..self.b.len() {
            acc += self.b[j] * self.basis.eval(j, x)?;
        }
        Ok(acc)
    }

    /// Predictions at every row of `queries`.
    pub fn evaluate_many(&self, queries: &DMatrix<f64>) -> Result<DVector<f64>> {
        let kx = self.kernel.cross(queries, &self.points)?;
        let mut out = kx * &self.a;
        if !self.b.is_empty() {
            out += cross_gram(&self.basis, queries)? * &self.b;
        }
        Ok(out)
    }
}

/// Evaluates a recovered function at one point.
pub fn evaluate(f: &RecoveredFunction, x: &[f64]) -> Result<f64> {
    f.evaluate(x)
}

fn check_targets(points: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if points.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training targets",
            expected: points.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Optimal recovery in the Gaussian RKHS with `V` spanned by `basis`.
pub fn fit_optimal(
    kernel: KernelSpec,
    basis: TaylorBasisSpec,
    points: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<RecoveredFunction> {
    check_targets(points, y)?;
    let g = kernel_gram(&kernel, points)?.matrix;
    let c = cross_gram(&basis, points)?;
    let coeffs = optimal_recover_gram(&g, &c, y)?;
    Ok(RecoveredFunction {
        points: points.clone(),
        kernel,
        a: coeffs.a,
        basis,
        b: coeffs.b,
    })
}

/// Kernel ridgeless regression (minimum-norm interpolant).
pub fn fit_ridgeless(
    kernel: KernelSpec,
    points: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<RecoveredFunction> {
    check_targets(points, y)?;
    let g = kernel_gram(&kernel, points)?.matrix;
    let coeffs = ridgeless_recover_gram(&g, y)?;
    Ok(RecoveredFunction {
        points: points.clone(),
        kernel,
        a: coeffs.a,
        basis: TaylorBasisSpec::new(kernel.dim(), 0, kernel.sigma())?.truncated(0)?,
        b: coeffs.b,
    })
}

/// Least-squares regression on the Taylor features alone.
pub fn fit_taylor_erm2(
    kernel: KernelSpec,
    basis: TaylorBasisSpec,
    points: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<RecoveredFunction> {
    check_targets(points, y)?;
    let c = cross_gram(&basis, points)?;
    let sol = erm2_gram(&c, y)?;
    Ok(RecoveredFunction {
        points: points.clone(),
        kernel,
        a: DVector::zeros(points.nrows()),
        basis,
        b: sol.b,
    })
}
