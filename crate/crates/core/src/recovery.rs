//! Optimal recovery maps.
//!
//! The closed-form map works purely through the Gramian `G` of the
//! representers and the cross-Gramian `C` between representers and a basis of
//! `V`, so the `*_gram` entry points serve both the coordinate setting and the
//! RKHS setting (where the representers are kernel sections).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{check_model_assumption, ModelSet, ObservationSetup};
use crate::linalg::{self, SpdFactor, RANK_TOL, SOLVE_TOL};

/// Coefficients of a recovered element `sum a_i u_i + sum b_j v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCoefficients {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl RecoveryCoefficients {
    /// Coordinates of the recovered element in `R^N`.
    pub fn assemble(&self, obs: &ObservationSetup, model: &ModelSet) -> DVector<f64> {
        let mut f = obs.combine(&self.a);
        if !self.b.is_empty() {
            f += model.combine(&self.b);
        }
        f
    }

    /// Assembles an output with no `V` component (ridge and ridgeless maps).
    pub fn assemble_representers(&self, obs: &ObservationSetup) -> DVector<f64> {
        obs.combine(&self.a)
    }
}

fn check_len(y: &DVector<f64>, m: usize) -> Result<()> {
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "observation vector",
            expected: m,
            found: y.len(),
        });
    }
    Ok(())
}

/// Closed-form optimal recovery from the Gramian `G` (m x m), cross-Gramian
/// `C` (m x n) and data `y`:
/// `b = (C^T G^-1 C)^-1 C^T G^-1 y`, `a = G^-1 (y - C b)`.
pub fn optimal_recover_gram(
    g: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<RecoveryCoefficients> {
    let m = g.nrows();
    check_len(y, m)?;
    if c.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "cross-Gramian rows",
            expected: m,
            found: c.nrows(),
        });
    }
    let g_fac = SpdFactor::new(g, "Gramian G")?;
    let n = c.ncols();
    if n == 0 {
        return Ok(RecoveryCoefficients {
            a: g_fac.solve(y),
            b: DVector::zeros(0),
        });
    }
    if n > m {
        return Err(Error::ModelAssumptionViolated { sigma_min: 0.0 });
    }
    let (max, min) = linalg::singular_extremes(c);
    if !(min > RANK_TOL * max) {
        return Err(Error::ModelAssumptionViolated { sigma_min: min });
    }
    let ginv_c = g_fac.solve_mat(c);
    let ginv_y = g_fac.solve(y);
    let s = c.tr_mul(&ginv_c);
    let s_fac = SpdFactor::new(&s, "C^T G^-1 C")?;
    let b = s_fac.solve(&c.tr_mul(&ginv_y));
    let a = g_fac.solve(&(y - c * &b));
    Ok(RecoveryCoefficients { a, b })
}

/// Locally optimal recovery map over the model set.
pub fn optimal_recover(
    obs: &ObservationSetup,
    model: &ModelSet,
    y: &DVector<f64>,
) -> Result<RecoveryCoefficients> {
    let diag = check_model_assumption(obs, model);
    if !diag.ok {
        return Err(Error::ModelAssumptionViolated {
            sigma_min: diag.sigma_min,
        });
    }
    check_len(y, obs.m())?;
    let g = obs.gramian();
    let c = obs.cross_gramian(model)?;
    optimal_recover_gram(&g, &c, y)
}

/// Kernel ridgeless regression: `a = G^-1 y`.
pub fn ridgeless_recover_gram(g: &DMatrix<f64>, y: &DVector<f64>) -> Result<RecoveryCoefficients> {
    check_len(y, g.nrows())?;
    let g_fac = SpdFactor::new(g, "Gramian G")?;
    Ok(RecoveryCoefficients {
        a: g_fac.solve(y),
        b: DVector::zeros(0),
    })
}

pub fn ridgeless_recover(obs: &ObservationSetup, y: &DVector<f64>) -> Result<RecoveryCoefficients> {
    ridgeless_recover_gram(&obs.gramian(), y)
}

/// Kernel ridge regression: `a = (G + gamma I)^-1 y`.
pub fn ridge_recover_gram(
    g: &DMatrix<f64>,
    y: &DVector<f64>,
    gamma: f64,
) -> Result<RecoveryCoefficients> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let m = g.nrows();
    check_len(y, m)?;
    let shifted = g + DMatrix::identity(m, m) * gamma;
    let fac = SpdFactor::new(&shifted, "G + gamma I")?;
    Ok(RecoveryCoefficients {
        a: fac.solve(y),
        b: DVector::zeros(0),
    })
}

pub fn ridge_recover(
    obs: &ObservationSetup,
    y: &DVector<f64>,
    gamma: f64,
) -> Result<RecoveryCoefficients> {
    ridge_recover_gram(&obs.gramian(), y, gamma)
}

/// Recovery problem with a transform `T: R^N -> R^N'`, a quantity of
/// interest `Q: R^N -> R^z` and a subspace `V` of `R^N'`.
#[derive(Debug, Clone)]
pub struct GeneralizedProblem {
    transform_t: DMatrix<f64>,
    quantity_q: DMatrix<f64>,
    basis_v: DMatrix<f64>,
    orthonormal_v: DMatrix<f64>,
}

impl GeneralizedProblem {
    pub fn new(
        transform_t: DMatrix<f64>,
        quantity_q: DMatrix<f64>,
        basis_v: DMatrix<f64>,
    ) -> Result<Self> {
        if transform_t.ncols() != quantity_q.ncols() {
            return Err(Error::DimensionMismatch {
                context: "T and Q input dimension",
                expected: transform_t.ncols(),
                found: quantity_q.ncols(),
            });
        }
        if basis_v.nrows() != transform_t.nrows() {
            return Err(Error::DimensionMismatch {
                context: "V basis and T output dimension",
                expected: transform_t.nrows(),
                found: basis_v.nrows(),
            });
        }
        let orthonormal_v = linalg::orthonormal_columns(&basis_v, "V basis")?;
        Ok(Self {
            transform_t,
            quantity_q,
            basis_v,
            orthonormal_v,
        })
    }

    /// `T = I`, `Q = I` over the subspace of a model set.
    pub fn identity(model: &ModelSet) -> Self {
        let n = model.dim();
        Self {
            transform_t: DMatrix::identity(n, n),
            quantity_q: DMatrix::identity(n, n),
            basis_v: model.basis().clone(),
            orthonormal_v: model.orthonormal_basis().clone(),
        }
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform_t
    }

    pub fn quantity(&self) -> &DMatrix<f64> {
        &self.quantity_q
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis_v
    }

    /// `(I - P_V) X` applied column-wise.
    fn remove_v(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x - &self.orthonormal_v * self.orthonormal_v.tr_mul(x)
    }

    fn input_dim(&self) -> usize {
        self.transform_t.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedRecovery {
    pub f_hat: DVector<f64>,
    pub q_value: DVector<f64>,
}

/// Minimum-norm interpolant `h = sum (G^-1 y)_i u_i`.
pub(crate) fn interpolant(obs: &ObservationSetup, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(y, obs.m())?;
    let g_fac = SpdFactor::new(&obs.gramian(), "Gramian G")?;
    Ok(obs.combine(&g_fac.solve(y)))
}

/// Minimizes `||T f - P_V T f||` subject to `L f = y`; among minimizers the
/// one of least norm is returned.
pub fn generalized_recover(
    obs: &ObservationSetup,
    prob: &GeneralizedProblem,
    y: &DVector<f64>,
) -> Result<GeneralizedRecovery> {
    if prob.input_dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            context: "generalized problem input dimension",
            expected: obs.dim(),
            found: prob.input_dim(),
        });
    }
    let h = interpolant(obs, y)?;
    let k = obs.kernel_basis();
    let f_hat = if k.ncols() == 0 {
        h
    } else {
        let a = prob.remove_v(&(&prob.transform_t * k));
        let th = DMatrix::from_column_slice(h.len(), 1, h.as_slice());
        let rhs = -prob
            .remove_v(&(&prob.transform_t * th))
            .column(0)
            .into_owned();
        let x = linalg::min_norm_lstsq(&a, &rhs);
        h + k * x
    };
    let q_value = &prob.quantity_q * &f_hat;
    Ok(GeneralizedRecovery { f_hat, q_value })
}

/// Compatibility indicator `sup_{u in ker L} ||Q u|| / dist(T u, V)`.
/// Returns `f64::INFINITY` when the denominator vanishes on a direction where
/// the numerator does not, and 0 when `ker(L)` is trivial.
pub fn compute_mu(obs: &ObservationSetup, prob: &GeneralizedProblem) -> Result<f64> {
    if prob.input_dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            context: "generalized problem input dimension",
            expected: obs.dim(),
            found: prob.input_dim(),
        });
    }
    let k = obs.kernel_basis();
    if k.ncols() == 0 {
        return Ok(0.0);
    }
    let qk = &prob.quantity_q * k;
    let tk = prob.remove_v(&(&prob.transform_t * k));
    let num = qk.tr_mul(&qk);
    let den = tk.tr_mul(&tk);

    let (lam, vecs) = linalg::sym_eigen_sorted(&den);
    let lam_max = lam.iter().cloned().fold(0.0, f64::max);
    let threshold = RANK_TOL * lam_max.max((&prob.transform_t * k).norm_squared());
    let range: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > threshold).collect();
    let null: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] <= threshold).collect();

    let qk_scale = qk.norm();
    if !null.is_empty() {
        let z = vecs.select_columns(&null);
        let leak = (&qk * z).norm();
        if leak > 1e-8 * qk_scale.max(f64::MIN_POSITIVE) {
            return Ok(f64::INFINITY);
        }
    }
    if range.is_empty() || qk_scale == 0.0 {
        return Ok(0.0);
    }
    let r = vecs.select_columns(&range);
    let inv_sqrt: Vec<f64> = range.iter().map(|&i| 1.0 / lam[i].sqrt()).collect();
    let scaled = r.tr_mul(&num) * &r;
    let whitened = DMatrix::from_fn(range.len(), range.len(), |i, j| {
        scaled[(i, j)] * inv_sqrt[i] * inv_sqrt[j]
    });
    let (ev, _) = linalg::sym_eigen_sorted(&whitened);
    let top = ev[ev.len() - 1].max(0.0);
    Ok(top.sqrt())
}

/// Minimal local worst-case error `mu * sqrt(eps^2 - delta^2)` with
/// `delta = dist(f_hat, V)` for the optimal recovery output `f_hat`.
pub fn minimal_local_wce(
    obs: &ObservationSetup,
    model: &ModelSet,
    y: &DVector<f64>,
) -> Result<f64> {
    let coeffs = optimal_recover(obs, model, y)?;
    let f_hat = coeffs.assemble(obs, model);
    let delta = model.distance(&f_hat);
    let eps = model.epsilon();
    if delta > eps + SOLVE_TOL * eps.max(1.0) {
        return Err(Error::ModelInconsistentData {
            delta,
            epsilon: eps,
        });
    }
    let slack = (eps * eps - delta * delta).max(0.0);
    if slack == 0.0 {
        return Ok(0.0);
    }
    let mu = compute_mu(obs, &GeneralizedProblem::identity(model))?;
    Ok(mu * slack.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn obs(rows: usize, cols: usize, data: &[f64]) -> ObservationSetup {
        ObservationSetup::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn two_dimensional_hand_example() {
        let o = obs(1, 2, &[1.0, 0.0]);
        let v = ModelSet::new(
            DMatrix::from_column_slice(2, 1, &[1.0 / SQRT_2, 1.0 / SQRT_2]),
            1.0,
        )
        .unwrap();
        let y = DVector::from_vec(vec![1.0]);
        let c = optimal_recover(&o, &v, &y).unwrap();
        assert!((c.b[0] - SQRT_2).abs() < 1e-14);
        assert!(c.a[0].abs() < 1e-14);
        let f = c.assemble(&o, &v);
        assert!((f[0] - 1.0).abs() < 1e-14 && (f[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trivial_v_matches_ridgeless() {
        let o = obs(2, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 2.0]);
        let v = ModelSet::trivial(3, 1.0).unwrap();
        let y = DVector::from_vec(vec![0.3, -1.0]);
        let or = optimal_recover(&o, &v, &y).unwrap();
        let rl = ridgeless_recover(&o, &y).unwrap();
        assert_eq!(or.a, rl.a);
        assert_eq!(or.b.len(), 0);
    }

    #[test]
    fn square_invertible_cross_gramian_interpolates_in_v() {
        let o = obs(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = ModelSet::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let y = DVector::from_vec(vec![2.0, 3.0]);
        let c = optimal_recover(&o, &v, &y).unwrap();
        let cross = o.cross_gramian(&v).unwrap();
        let expected = cross.lu().solve(&y).unwrap();
        assert!((&c.b - expected).amax() < 1e-12);
        assert!(c.a.amax() < 1e-12);
    }

    #[test]
    fn ridgeless_examples() {
        let o = obs(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![0.7, -2.0]);
        assert!((ridgeless_recover(&o, &y).unwrap().a - &y).amax() < 1e-15);
        let zero = DVector::zeros(2);
        assert_eq!(ridgeless_recover(&o, &zero).unwrap().a, zero);

        let q: f64 = 0.3;
        let g = DMatrix::from_row_slice(2, 2, &[1.0, q, q, 1.0]);
        let a = ridgeless_recover_gram(&g, &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap()
            .a;
        let d = 1.0 - q * q;
        assert!((a[0] - 1.0 / d).abs() < 1e-14 && (a[1] + q / d).abs() < 1e-14);
    }

    #[test]
    fn ridge_examples() {
        let i1 = DMatrix::identity(1, 1);
        let a = ridge_recover_gram(&i1, &DVector::from_vec(vec![2.0]), 1.0)
            .unwrap()
            .a;
        assert!((a[0] - 1.0).abs() < 1e-15);
        let g = DMatrix::from_row_slice(1, 1, &[2.0]);
        let a = ridge_recover_gram(&g, &DVector::from_vec(vec![4.0]), 2.0)
            .unwrap()
            .a;
        assert!((a[0] - 1.0).abs() < 1e-15);
        assert_eq!(
            ridge_recover_gram(&g, &DVector::from_vec(vec![4.0]), 0.0),
            Err(Error::NonPositiveGamma(0.0))
        );
        assert!(ridge_recover_gram(&g, &DVector::from_vec(vec![4.0]), -1.0).is_err());
    }

    #[test]
    fn ridge_converges_linearly_to_ridgeless() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 1.0, 0.3, 0.1, 0.3, 1.0]);
        let y = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let a0 = ridgeless_recover_gram(&g, &y).unwrap().a;
        let mut prev = f64::INFINITY;
        let mut gamma = 1e-2;
        for _ in 0..6 {
            let gap = (ridge_recover_gram(&g, &y, gamma).unwrap().a - &a0).norm();
            if prev.is_finite() {
                let ratio = prev / gap;
                assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
            }
            prev = gap;
            gamma /= 2.0;
        }
    }

    #[test]
    fn violated_assumption_is_rejected() {
        let o = obs(1, 2, &[1.0, 0.0]);
        let v = ModelSet::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), 1.0).unwrap();
        let err = optimal_recover(&o, &v, &DVector::from_vec(vec![1.0])).unwrap_err();
        assert!(matches!(err, Error::ModelAssumptionViolated { .. }));
    }

    #[test]
    fn generalized_min_norm_tie_break() {
        let o = obs(1, 2, &[1.0, 0.0]);
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let q = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let prob = GeneralizedProblem::new(t, q, DMatrix::zeros(2, 0)).unwrap();
        let r = generalized_recover(&o, &prob, &DVector::from_vec(vec![3.0])).unwrap();
        assert!((r.f_hat[0] - 3.0).abs() < 1e-14);
        assert!(r.f_hat[1].abs() < 1e-14);
        assert!(r.q_value[0].abs() < 1e-14);
    }

    #[test]
    fn generalized_identity_matches_closed_form() {
        let o = obs(2, 4, &[1.0, 0.2, -0.3, 0.0, 0.5, 1.0, 0.1, 0.7]);
        let v = ModelSet::new(
            DMatrix::from_column_slice(4, 1, &[0.3, 0.1, 1.0, -0.4]),
            1.0,
        )
        .unwrap();
        let y = DVector::from_vec(vec![0.4, -1.1]);
        let closed = optimal_recover(&o, &v, &y).unwrap().assemble(&o, &v);
        let gen = generalized_recover(&o, &GeneralizedProblem::identity(&v), &y).unwrap();
        assert!((gen.f_hat - &closed).amax() < 1e-10);
        assert!((gen.q_value - closed).amax() < 1e-10);
    }

    #[test]
    fn mu_examples() {
        // V = {0}: ratio identically 1.
        let o = obs(1, 3, &[1.0, 1.0, 0.0]);
        let trivial = ModelSet::trivial(3, 1.0).unwrap();
        let mu = compute_mu(&o, &GeneralizedProblem::identity(&trivial)).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);

        // V orthogonal to ker(L).
        let v_perp =
            ModelSet::new(DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]), 1.0).unwrap();
        let mu = compute_mu(&o, &GeneralizedProblem::identity(&v_perp)).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);

        // ker(L) = span{(1,1)/sqrt2}, V = span{e1}: mu = sqrt 2.
        let o2 = obs(1, 2, &[1.0, -1.0]);
        let v = ModelSet::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), 1.0).unwrap();
        let mu = compute_mu(&o2, &GeneralizedProblem::identity(&v)).unwrap();
        assert!((mu - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn mu_trivial_kernel_is_zero() {
        let o = obs(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = ModelSet::trivial(2, 1.0).unwrap();
        assert_eq!(
            compute_mu(&o, &GeneralizedProblem::identity(&v)).unwrap(),
            0.0
        );
    }

    #[test]
    fn mu_infinite_when_v_contains_kernel_direction() {
        let o = obs(1, 2, &[1.0, 0.0]);
        let v = ModelSet::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), 1.0).unwrap();
        let mu = compute_mu(&o, &GeneralizedProblem::identity(&v)).unwrap();
        assert!(mu.is_infinite());

        // Q vanishing on the offending direction keeps mu finite.
        let t = DMatrix::identity(2, 2);
        let q = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let prob = GeneralizedProblem::new(t, q, v.basis().clone()).unwrap();
        assert_eq!(compute_mu(&o, &prob).unwrap(), 0.0);
    }

    #[test]
    fn minimal_wce_examples() {
        let o = obs(1, 3, &[1.0, 0.0, 0.0]);
        let v = ModelSet::new(DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]), 0.5).unwrap();
        // y = L(v) for v in V: delta = 0, result mu * eps.
        let y = DVector::from_vec(vec![2.0]);
        let mu = compute_mu(&o, &GeneralizedProblem::identity(&v)).unwrap();
        let val = minimal_local_wce(&o, &v, &y).unwrap();
        assert!((val - mu * 0.5).abs() < 1e-12);
    }

    #[test]
    fn minimal_wce_zero_at_exact_radius_and_error_below() {
        // f = (2, 2, t) interpolates; dist(f, span{e1}) is minimal at t = 0, delta = 2.
        let o = obs(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = ModelSet::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 2.0).unwrap();
        let y = DVector::from_vec(vec![2.0, 2.0]);
        assert_eq!(minimal_local_wce(&o, &v, &y).unwrap(), 0.0);
        let tight = v.with_epsilon(1.0).unwrap();
        assert!(matches!(
            minimal_local_wce(&o, &tight, &y),
            Err(Error::ModelInconsistentData { .. })
        ));
    }
}
