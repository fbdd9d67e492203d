//! Finite-dimensional Hilbert-space primitives.
//!
//! Elements of the ambient space are stored by their coordinates in an
//! orthonormal coordinate system, so inner products are plain dot products.
//! An [`ObservationSetup`] holds the Riesz representers of the observation
//! functionals together with an orthonormal basis of their joint kernel, and
//! a [`ModelSet`] holds the approximation subspace `V` and radius `epsilon`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};

/// Coordinates of an element of `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertVector(DVector<f64>);

impl HilbertVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(coords))
    }

    pub fn from_dvector(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("vector must have length >= 1".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("vector has non-finite entries".into()));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.dot(&other.0)
    }
}

impl From<HilbertVector> for DVector<f64> {
    fn from(v: HilbertVector) -> Self {
        v.0
    }
}

/// Observation operator `L` given by its representers (rows), with a cached
/// orthonormal basis of `ker(L)`.
#[derive(Debug, Clone)]
pub struct ObservationSetup {
    representers: DMatrix<f64>,
    kernel_basis: DMatrix<f64>,
}

impl ObservationSetup {
    /// Validates that the `m x N` representer matrix has independent rows and
    /// precomputes the kernel basis.
    pub fn new(representers: DMatrix<f64>) -> Result<Self> {
        if representers.nrows() == 0 || representers.ncols() == 0 {
            return Err(Error::InvalidInput(
                "representer matrix must be non-empty".into(),
            ));
        }
        if representers.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "representer matrix has non-finite entries".into(),
            ));
        }
        let kernel_basis = kernel_basis(&representers)?;
        Ok(Self {
            representers,
            kernel_basis,
        })
    }

    /// Number of observations `m`.
    pub fn m(&self) -> usize {
        self.representers.nrows()
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        self.representers.ncols()
    }

    pub fn representers(&self) -> &DMatrix<f64> {
        &self.representers
    }

    /// `N x (N - m)` column-orthonormal basis of `ker(L)`.
    pub fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel_basis
    }

    /// `L(f)`.
    pub fn observe(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.representers * f
    }

    /// Gramian `G = U U^T` of the representers.
    pub fn gramian(&self) -> DMatrix<f64> {
        &self.representers * self.representers.transpose()
    }

    /// Cross-Gramian `C_{ij} = <u_i, v_j>`.
    pub fn cross_gramian(&self, model: &ModelSet) -> Result<DMatrix<f64>> {
        if model.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "cross-Gramian",
                expected: self.dim(),
                found: model.dim(),
            });
        }
        Ok(&self.representers * model.basis())
    }

    /// Assembles `sum a_i u_i`.
    pub fn combine(&self, a: &DVector<f64>) -> DVector<f64> {
        self.representers.tr_mul(a)
    }
}

/// Model set `{ f : dist(f, V) <= epsilon }`.
#[derive(Debug, Clone)]
pub struct ModelSet {
    basis_v: DMatrix<f64>,
    orthonormal: DMatrix<f64>,
    epsilon: f64,
}

impl ModelSet {
    pub fn new(basis_v: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        if basis_v.nrows() == 0 {
            return Err(Error::InvalidInput("ambient dimension must be >= 1".into()));
        }
        let orthonormal = linalg::orthonormal_columns(&basis_v, "V basis")?;
        Ok(Self {
            basis_v,
            orthonormal,
            epsilon,
        })
    }

    /// The trivial subspace `V = {0}` in `R^dim`.
    pub fn trivial(dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, 0), epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    /// `n = dim(V)`.
    pub fn n(&self) -> usize {
        self.basis_v.ncols()
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        self.basis_v.nrows()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis_v
    }

    /// Orthonormal basis of `V`.
    pub fn orthonormal_basis(&self) -> &DMatrix<f64> {
        &self.orthonormal
    }

    /// `P_V f`.
    pub fn project(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.orthonormal * self.orthonormal.tr_mul(f)
    }

    /// `f - P_V f`.
    pub fn residual(&self, f: &DVector<f64>) -> DVector<f64> {
        f - self.project(f)
    }

    /// `(I - P_V) X` applied to each column.
    pub fn residual_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x - &self.orthonormal * self.orthonormal.tr_mul(x)
    }

    /// `dist(f, V)`.
    pub fn distance(&self, f: &DVector<f64>) -> f64 {
        self.residual(f).norm()
    }

    /// Assembles `sum b_j v_j`.
    pub fn combine(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.basis_v * b
    }
}

/// Orthonormal basis of the kernel of an `m x N` representer matrix, taken
/// from the trailing `N - m` columns of the full Householder `Q` factor of
/// its transpose.
pub fn kernel_basis(representers: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = representers.shape();
    if m > n {
        return Err(Error::RankDeficient {
            what: "representers",
            sigma_min: 0.0,
            tolerance: 0.0,
        });
    }
    let lt = representers.transpose();
    linalg::require_full_column_rank(&lt, "representers")?;
    if m == n {
        return Ok(DMatrix::zeros(n, 0));
    }
    let qr = lt.qr();
    let mut qt = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut qt);
    let q = qt.transpose();
    Ok(q.columns(m, n - m).into_owned())
}

/// Orthogonal projection of `v` onto the span of the columns of `basis`.
pub fn project(v: &HilbertVector, basis: &DMatrix<f64>) -> Result<HilbertVector> {
    if basis.nrows() != v.dim() {
        return Err(Error::DimensionMismatch {
            context: "project",
            expected: v.dim(),
            found: basis.nrows(),
        });
    }
    let q = linalg::orthonormal_columns(basis, "projection basis")?;
    Ok(HilbertVector(&q * q.tr_mul(v.coords())))
}

/// Matrix of pairwise inner products `<a_i, b_j>`.
pub fn gram(vectors_a: &[HilbertVector], vectors_b: &[HilbertVector]) -> Result<DMatrix<f64>> {
    let dim = vectors_a
        .first()
        .or_else(|| vectors_b.first())
        .map(HilbertVector::dim)
        .unwrap_or(0);
    for v in vectors_a.iter().chain(vectors_b) {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "gram",
                expected: dim,
                found: v.dim(),
            });
        }
    }
    Ok(DMatrix::from_fn(
        vectors_a.len(),
        vectors_b.len(),
        |i, j| vectors_a[i].dot(&vectors_b[j]),
    ))
}

/// Result of checking `V ∩ ker(L) = {0}` through the cross-Gramian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelAssumption {
    pub sigma_min: f64,
    pub ok: bool,
}

/// `V ∩ ker(L) = {0}` holds iff the cross-Gramian `C` has full column rank;
/// `sigma_min(C)` is compared against `RANK_TOL * ||U|| * ||V||`.
pub fn check_model_assumption(obs: &ObservationSetup, model: &ModelSet) -> ModelAssumption {
    if model.n() == 0 {
        return ModelAssumption {
            sigma_min: f64::INFINITY,
            ok: model.dim() == obs.dim(),
        };
    }
    let c = match obs.cross_gramian(model) {
        Ok(c) => c,
        Err(_) => {
            return ModelAssumption {
                sigma_min: 0.0,
                ok: false,
            }
        }
    };
    if model.n() > obs.m() {
        return ModelAssumption {
            sigma_min: 0.0,
            ok: false,
        };
    }
    let (_, min) = linalg::singular_extremes(&c);
    let scale = linalg::singular_extremes(obs.representers()).0
        * linalg::singular_extremes(model.basis()).0;
    ModelAssumption {
        sigma_min: min,
        ok: min > RANK_TOL * scale,
    }
}
