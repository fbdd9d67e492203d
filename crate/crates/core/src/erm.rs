//! Empirical-risk-minimization baselines over the hypothesis class `V`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{ModelSet, ObservationSetup};
use crate::linalg::{self, RANK_TOL};
use crate::recovery::interpolant;

/// Coefficients over the basis of `V` returned by an ERM solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmSolution {
    pub b: DVector<f64>,
    /// Norm of the data residual `y - C b` in the loss's own norm
    /// (l2 for `erm2`, l1 for `erm1`).
    pub residual_norm: f64,
    /// Iterative solves performed (0 for closed forms, 1 for the linear program).
    pub iterations: usize,
}

impl ErmSolution {
    pub fn assemble(&self, model: &ModelSet) -> DVector<f64> {
        model.combine(&self.b)
    }
}

fn check_shapes(c: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if c.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "cross-Gramian rows vs observations",
            expected: c.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Least squares through a thin QR factorization.
fn least_squares(c: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    linalg::require_full_column_rank(c, "cross-Gramian C")?;
    let qr = c.clone().qr();
    let rhs = qr.q().tr_mul(y);
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient {
            what: "cross-Gramian C",
            sigma_min: 0.0,
            tolerance: 0.0,
        })
}

/// Square-loss ERM from the cross-Gramian: `b = (C^T C)^-1 C^T y`.
pub fn erm2_gram(c: &DMatrix<f64>, y: &DVector<f64>) -> Result<ErmSolution> {
    check_shapes(c, y)?;
    if c.ncols() == 0 {
        return Ok(ErmSolution {
            b: DVector::zeros(0),
            residual_norm: y.norm(),
            iterations: 0,
        });
    }
    let b = least_squares(c, y)?;
    let residual_norm = (y - c * &b).norm();
    Ok(ErmSolution {
        b,
        residual_norm,
        iterations: 0,
    })
}

pub fn erm2(obs: &ObservationSetup, model: &ModelSet, y: &DVector<f64>) -> Result<ErmSolution> {
    erm2_gram(&obs.cross_gramian(model)?, y)
}

fn l1(r: &DVector<f64>) -> f64 {
    r.iter().map(|x| x.abs()).sum()
}

/// Absolute-loss ERM, solved exactly as the linear program
/// `min sum t_i  s.t.  -t <= y - C b <= t`, followed by a vertex polish that
/// re-solves the interpolation conditions on the `n` smallest residuals.
pub fn erm1_gram(c: &DMatrix<f64>, y: &DVector<f64>) -> Result<ErmSolution> {
    check_shapes(c, y)?;
    let (m, n) = c.shape();
    if n == 0 {
        return Ok(ErmSolution {
            b: DVector::zeros(0),
            residual_norm: l1(y),
            iterations: 0,
        });
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let bvars: Vec<_> = (0..n)
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for i in 0..m {
        let t = lp.add_var(1.0, (0.0, f64::INFINITY));
        let mut upper = vec![(t, 1.0)];
        let mut lower = vec![(t, 1.0)];
        for (j, &bj) in bvars.iter().enumerate() {
            upper.push((bj, c[(i, j)]));
            lower.push((bj, -c[(i, j)]));
        }
        lp.add_constraint(upper.as_slice(), ComparisonOp::Ge, y[i]);
        lp.add_constraint(lower.as_slice(), ComparisonOp::Ge, -y[i]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?;
    let mut b = DVector::from_iterator(n, bvars.iter().map(|&v| sol[v]));
    let mut objective = l1(&(y - c * &b));
    if let Some(vertex) = vertex_polish(c, y, &b) {
        let obj = l1(&(y - c * &vertex));
        if obj <= objective {
            objective = obj;
            b = vertex;
        }
    }
    Ok(ErmSolution {
        b,
        residual_norm: objective,
        iterations: 1,
    })
}

/// Solves `C_S b = y_S` on the `n` rows with the smallest residuals.
fn vertex_polish(c: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = c.ncols();
    let r = y - c * b;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()));
    let rows: Vec<usize> = order.into_iter().take(n).collect();
    let cs = c.select_rows(&rows);
    let ys = DVector::from_iterator(n, rows.iter().map(|&i| y[i]));
    let (max, min) = linalg::singular_extremes(&cs);
    if !(min > RANK_TOL * max) {
        return None;
    }
    cs.lu().solve(&ys)
}

pub fn erm1(obs: &ObservationSetup, model: &ModelSet, y: &DVector<f64>) -> Result<ErmSolution> {
    erm1_gram(&obs.cross_gramian(model)?, y)
}

/// Output of the square-loss ERM constrained to the model set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedErm {
    pub f_hat: DVector<f64>,
    /// Whether `dist(f_hat, V) = epsilon`.
    pub active: bool,
    pub residual_norm: f64,
    /// Lagrange multiplier of the distance constraint (0 when inactive).
    pub multiplier: f64,
}

const BISECTION_MAX_ITER: usize = 300;
const CONSTRAINT_TOL: f64 = 1e-10;

/// Minimizes `||y - L f||_2` subject to `dist(f, V) <= eps`.
///
/// When interpolation is possible inside the model set the interpolant of
/// least norm is returned; otherwise the distance constraint is active and
/// its multiplier is found by bisection on a log scale.
pub fn erm2_constrained(
    obs: &ObservationSetup,
    model: &ModelSet,
    y: &DVector<f64>,
) -> Result<ConstrainedErm> {
    let eps = model.epsilon();
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "constrained ERM needs epsilon > 0, got {eps}"
        )));
    }
    if model.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            context: "model set dimension",
            expected: obs.dim(),
            found: model.dim(),
        });
    }
    let h = interpolant(obs, y)?;
    let w = model.residual(&h);
    let w_sq = w.norm_squared();
    if w_sq.sqrt() <= eps {
        return Ok(ConstrainedErm {
            f_hat: h,
            active: false,
            residual_norm: 0.0,
            multiplier: 0.0,
        });
    }

    let k = obs.kernel_basis();
    let kn = k.ncols();
    let a = model.residual_columns(k);
    let (lam, vecs) = linalg::sym_eigen_sorted(&a.tr_mul(&a));
    let lam_floor = RANK_TOL
        * lam
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
    let p = vecs.tr_mul(&k.tr_mul(&w));
    let active_dir: Vec<bool> = lam.iter().map(|&l| l > lam_floor).collect();
    let delta_sq = w_sq
        - (0..kn)
            .filter(|&i| active_dir[i])
            .map(|i| p[i] * p[i] / lam[i])
            .sum::<f64>();

    if delta_sq <= eps * eps {
        // Zero residual: least-norm interpolant with dist <= eps. In the
        // eigenbasis x_i(nu) = -nu p_i / (1 + nu lambda_i).
        let target = eps * eps;
        let dist_sq = |nu: f64| -> f64 {
            let mut s = w_sq;
            for i in 0..kn {
                if !active_dir[i] {
                    continue;
                }
                let x = if nu.is_infinite() {
                    -p[i] / lam[i]
                } else {
                    -nu * p[i] / (1.0 + nu * lam[i])
                };
                s += lam[i] * x * x + 2.0 * x * p[i];
            }
            s
        };
        let nu = bisect_multiplier(|nu| dist_sq(nu) - target, target)?;
        let x_tilde = DVector::from_fn(kn, |i, _| {
            if !active_dir[i] {
                0.0
            } else if nu.is_infinite() {
                -p[i] / lam[i]
            } else {
                -nu * p[i] / (1.0 + nu * lam[i])
            }
        });
        let f_hat = &h + k * (&vecs * x_tilde);
        return Ok(ConstrainedErm {
            f_hat,
            active: true,
            residual_norm: 0.0,
            multiplier: nu,
        });
    }

    // Positive residual: f(lambda) = argmin ||y - R f||^2 + lambda ||P_{V⊥} f||^2.
    let r = obs.representers();
    let rtr = r.tr_mul(r);
    let rty = r.tr_mul(y);
    let n_dim = obs.dim();
    let p_perp = model.residual_columns(&DMatrix::identity(n_dim, n_dim));
    let solve = |lambda: f64| -> DVector<f64> {
        let sys = &rtr + &p_perp * lambda;
        let sym = (&sys + sys.transpose()) * 0.5;
        if let Some(chol) = Cholesky::new(sym.clone()) {
            let diag = chol.l_dirty().diagonal();
            let max = diag.iter().cloned().fold(0.0, f64::max);
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            if (max / min).powi(2) < 1e14 {
                return chol.solve(&rty);
            }
        }
        let mut stacked = DMatrix::zeros(r.nrows() + n_dim, n_dim);
        stacked.rows_mut(0, r.nrows()).copy_from(r);
        stacked
            .rows_mut(r.nrows(), n_dim)
            .copy_from(&(&p_perp * lambda.sqrt()));
        let mut rhs = DVector::zeros(r.nrows() + n_dim);
        rhs.rows_mut(0, r.nrows()).copy_from(y);
        linalg::min_norm_lstsq(&stacked, &rhs)
    };
    let target = eps * eps;
    let lambda = bisect_multiplier(
        |l| model.residual(&solve(l)).norm_squared() - target,
        target,
    )?;
    let f_hat = solve(lambda);
    let residual_norm = (y - obs.observe(&f_hat)).norm();
    Ok(ConstrainedErm {
        f_hat,
        active: true,
        residual_norm,
        multiplier: lambda,
    })
}

/// Root of a decreasing function `g` on `(0, inf)` with `g(0+) > 0`, found by
/// geometric bracket expansion then bisection in `log(nu)`. Returns infinity
/// when `g` stays positive up to the largest representable bracket.
fn bisect_multiplier(g: impl Fn(f64) -> f64, scale: f64) -> Result<f64> {
    let tol = CONSTRAINT_TOL * scale.max(f64::MIN_POSITIVE);
    let mut lo = 1.0;
    let mut hi = 1.0;
    let g1 = g(1.0);
    if g1.abs() <= tol {
        return Ok(1.0);
    }
    if g1 > 0.0 {
        loop {
            hi *= 10.0;
            let v = g(hi);
            if v <= 0.0 {
                break;
            }
            if v <= tol || hi > 1e200 {
                return Ok(if hi > 1e200 { f64::INFINITY } else { hi });
            }
            lo = hi;
        }
    } else {
        loop {
            lo /= 10.0;
            let v = g(lo);
            if v > 0.0 {
                break;
            }
            if lo < 1e-200 {
                return Ok(lo);
            }
            hi = lo;
        }
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = (lo * hi).sqrt();
        let v = g(mid);
        if v.abs() <= tol {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            return Ok(mid);
        }
    }
    Err(Error::NoConvergence {
        what: "multiplier bisection",
        iterations: BISECTION_MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::check_model_assumption;

    #[test]
    fn erm2_examples() {
        let c = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let s = erm2_gram(&c, &DVector::from_vec(vec![0.0, 2.0])).unwrap();
        assert!((s.b[0] - 1.0).abs() < 1e-14);
        assert!((s.residual_norm - 2f64.sqrt()).abs() < 1e-14);

        let sq = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![3.0, 1.0]);
        let s = erm2_gram(&sq, &y).unwrap();
        assert!((s.b[0] - 1.0).abs() < 1e-14 && (s.b[1] - 1.0).abs() < 1e-14);
        assert!(s.residual_norm < 1e-14);
    }

    #[test]
    fn erm2_rank_deficient() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            erm2_gram(&c, &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn erm1_median() {
        let c = DMatrix::from_element(3, 1, 1.0);
        let s = erm1_gram(&c, &DVector::from_vec(vec![1.0, 2.0, 9.0])).unwrap();
        assert!((s.b[0] - 2.0).abs() < 1e-12, "{}", s.b[0]);
        assert!((s.residual_norm - 8.0).abs() < 1e-12);
    }

    #[test]
    fn erm1_single_observation() {
        let c = DMatrix::from_element(1, 1, 1.0);
        let s = erm1_gram(&c, &DVector::from_vec(vec![-3.5])).unwrap();
        assert_eq!(s.b[0], -3.5);
    }

    #[test]
    fn erm1_exact_fit() {
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = &c * DVector::from_vec(vec![0.5, -1.5]);
        let s = erm1_gram(&c, &y).unwrap();
        assert!(s.residual_norm < 1e-10);
        assert!((s.b[0] - 0.5).abs() < 1e-10 && (s.b[1] + 1.5).abs() < 1e-10);
    }

    #[test]
    fn erm1_matches_grid_oracle() {
        // 1-D: minimize sum |y_i - c_i b| over a dense grid.
        let c = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 0.5, 1.5, 3.0]);
        let y = DVector::from_vec(vec![1.2, 1.7, 0.1, 2.9, 2.2]);
        let s = erm1_gram(&c, &y).unwrap();
        let obj = |b: f64| (0..5).map(|i| (y[i] - c[(i, 0)] * b).abs()).sum::<f64>();
        let best = (0..=200_000)
            .map(|i| -1.0 + 3.0 * i as f64 / 200_000.0)
            .map(obj)
            .fold(f64::INFINITY, f64::min);
        assert!(s.residual_norm <= best + 1e-7 * (1.0 + l1(&y)));
    }

    #[test]
    fn constrained_hand_instance() {
        let obs = ObservationSetup::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let model = ModelSet::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), 1.0).unwrap();
        let out = erm2_constrained(&obs, &model, &DVector::from_vec(vec![2.0])).unwrap();
        assert!(out.active);
        assert!((out.f_hat[0] - 1.0).abs() < 1e-8, "{:?}", out.f_hat);
        assert!(out.f_hat[1].abs() < 1e-8);
        assert!((out.residual_norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constrained_inactive_returns_min_norm_interpolant() {
        let obs = ObservationSetup::new(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0])).unwrap();
        let model = ModelSet::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 1e6).unwrap();
        let y = DVector::from_vec(vec![2.0]);
        let out = erm2_constrained(&obs, &model, &y).unwrap();
        assert!(!out.active);
        assert_eq!(out.residual_norm, 0.0);
        assert!((out.f_hat[0] - 1.0).abs() < 1e-14 && (out.f_hat[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constrained_interpolates_when_possible() {
        // h = (1, 1, 0) has distance 1 from V = span{e1}; moving along ker(L)
        // reaches distance 0, so any eps in (0, 1) still interpolates.
        let obs = ObservationSetup::new(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0])).unwrap();
        let model = ModelSet::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 0.4).unwrap();
        assert!(check_model_assumption(&obs, &model).ok);
        let y = DVector::from_vec(vec![2.0]);
        let out = erm2_constrained(&obs, &model, &y).unwrap();
        assert!(out.active);
        assert!((obs.observe(&out.f_hat)[0] - 2.0).abs() < 1e-12);
        assert!((model.distance(&out.f_hat) - 0.4).abs() < 1e-9);
    }
}
