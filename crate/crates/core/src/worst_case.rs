//! Exact local worst-case error of an arbitrary recovery output.
//!
//! Writing admissible elements as `f = h + K x` with `h` the minimum-norm
//! interpolant and `K` an orthonormal basis of `ker(L)`, the squared error
//! splits into a constant part and the maximum of `||x||^2 - 2 <x, K^T g>`
//! over the ellipsoid `||P_{V⊥} K x + w||^2 <= eps^2`. The S-lemma turns that
//! maximum into a two-variable semidefinite program in `(c, d)`; eliminating
//! `c` through a Schur complement leaves the convex one-dimensional dual
//!
//! ```text
//! phi(d) = b(d)^T (d M - I)^+ b(d) - d (||w||^2 - eps^2),  d >= 1 / lambda_min(M)
//! ```
//!
//! with `M = K^T P_{V⊥} K` and `b(d) = K^T (d w + g')`. It is evaluated in the
//! eigenbasis of `M`, which is computed once per call.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{check_model_assumption, HilbertVector, ModelSet, ObservationSetup};
use crate::linalg::{self, RANK_TOL};
use crate::recovery::interpolant;

/// Relative slack on `eps` when deciding feasibility.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Below this relative value of `eps^2 - delta^2` the admissible set is a single point.
const DEGENERATE_SLACK: f64 = 1e-12;
/// Relative tolerance identifying eigenvalues tied with `lambda_min`.
const CLUSTER_TOL: f64 = 1e-10;
/// Relative size of `b(d_min)` on the bottom eigenspace below which the
/// boundary point `d_min` is admissible.
const HARD_CASE_TOL: f64 = 1e-11;
const MAX_BRACKET_DOUBLINGS: usize = 2000;
const MAX_GOLDEN_ITERS: usize = 500;
const MAX_NEWTON_ITERS: usize = 60;
/// Largest `N - m` accepted by the brute-force oracle.
pub const MAX_BRUTE_FORCE_DIM: usize = 3;

/// Value of the local worst-case error together with the dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct WceCertificate {
    /// `sup { ||f - g|| : L f = y, dist(f, V) <= eps }`.
    pub value: f64,
    pub c_star: f64,
    /// Optimal multiplier. Infinite when the admissible set is a single point.
    pub d_star: f64,
    pub d_min: f64,
    /// `phi'(d_star)`; zero at an interior optimum.
    pub dual_gradient: f64,
    /// The optimum sits on the PSD boundary `d = d_min`.
    pub boundary: bool,
    pub h_norm_sq: f64,
    pub w_norm_sq: f64,
    /// `||h - g''||^2 + ||g'||^2`.
    pub delta_terms: f64,
    /// `min dist(f, V)` over interpolants.
    pub min_distance: f64,
    pub feasible: bool,
}

/// The unique `h` in `ker(L)⊥` with `L h = y`.
pub fn min_norm_interpolant(obs: &ObservationSetup, y: &DVector<f64>) -> Result<HilbertVector> {
    HilbertVector::from_dvector(interpolant(obs, y)?)
}

/// Dual objective in the shifted variable `t = d - d_min >= 0`.
struct Dual {
    lam: Vec<f64>,
    /// `(lambda_i - lambda_min) / lambda_min`, clamped to zero on the bottom cluster.
    gap: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    d_min: f64,
    /// `eps^2 - ||w||^2`.
    linear: f64,
    /// Bottom-cluster terms collapse to `t p^2 / lambda`.
    hard: Vec<bool>,
}

impl Dual {
    fn terms(&self, t: f64) -> (f64, f64, f64) {
        let d = self.d_min + t;
        let (mut f, mut df, mut d2f) = (d * self.linear, self.linear, 0.0);
        for i in 0..self.lam.len() {
            let (lam, p) = (self.lam[i], self.p[i]);
            if self.hard[i] {
                f += t * p * p / lam;
                df += p * p / lam;
                continue;
            }
            let beta = d * p + self.q[i];
            let den = lam * t + self.gap[i];
            if den <= 0.0 {
                if beta == 0.0 {
                    continue;
                }
                return (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
            }
            let ratio = beta / den;
            f += beta * ratio;
            df += 2.0 * p * ratio - lam * ratio * ratio;
            let s = p - lam * ratio;
            d2f += 2.0 * s * s / den;
        }
        (f, df, d2f)
    }

    fn value(&self, t: f64) -> f64 {
        self.terms(t).0
    }
}

/// Golden-section search for a convex function on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..MAX_GOLDEN_ITERS {
        if (b - a) <= 1e-12 * (1.0 + 0.5 * (a + b).abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Safeguarded Newton iteration on `phi'` inside `[lo, hi]`.
fn newton_polish(dual: &Dual, t0: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut t = t0;
    for _ in 0..MAX_NEWTON_ITERS {
        let (f, df, d2f) = dual.terms(t);
        if df.abs() <= 1e-14 * (1.0 + f.abs()) {
            break;
        }
        if df > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = if d2f > 0.0 { t - df / d2f } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) {
            break;
        }
        t = next;
    }
    t
}

/// Local worst-case error of the recovery output `g` at data `y`.
pub fn local_wce(
    obs: &ObservationSetup,
    model: &ModelSet,
    y: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<WceCertificate> {
    let diag = check_model_assumption(obs, model);
    if !diag.ok {
        return Err(Error::ModelAssumptionViolated {
            sigma_min: diag.sigma_min,
        });
    }
    if g.len() != obs.dim() {
        return Err(Error::DimensionMismatch {
            context: "recovery output",
            expected: obs.dim(),
            found: g.len(),
        });
    }
    let eps = model.epsilon();
    let h = interpolant(obs, y)?;
    let k = obs.kernel_basis();
    let w = model.residual(&h);
    let w_norm_sq = w.norm_squared();
    let g_ker = k * k.tr_mul(g);
    let g_perp = g - &g_ker;
    let delta_terms = (&h - &g_perp).norm_squared() + g_ker.norm_squared();
    let h_norm_sq = h.norm_squared();

    let cert =
        |value_sq: f64, c_star, d_star, d_min, grad, boundary, min_distance| WceCertificate {
            value: value_sq.max(0.0).sqrt(),
            c_star,
            d_star,
            d_min,
            dual_gradient: grad,
            boundary,
            h_norm_sq,
            w_norm_sq,
            delta_terms,
            min_distance,
            feasible: true,
        };

    let kn = k.ncols();
    if kn == 0 {
        let delta = w_norm_sq.sqrt();
        if delta > eps * (1.0 + FEASIBILITY_TOL) {
            return Err(Error::InfeasibleData {
                delta,
                epsilon: eps,
            });
        }
        return Ok(cert(delta_terms, 0.0, 0.0, 0.0, 0.0, true, delta));
    }

    // M = K^T P_{V⊥} K = I - (K^T Q_V)(K^T Q_V)^T
    let kq = k.tr_mul(model.orthonormal_basis());
    let m_mat = DMatrix::identity(kn, kn) - &kq * kq.transpose();
    let (lam, vecs) = linalg::sym_eigen_sorted(&m_mat);
    let lam_min = lam[0];
    let lam_max = lam[kn - 1];
    if !(lam_min > RANK_TOL * lam_max) {
        return Err(Error::ModelAssumptionViolated {
            sigma_min: lam_min.max(0.0).sqrt(),
        });
    }
    let p = vecs.tr_mul(&k.tr_mul(&w));
    let q = vecs.tr_mul(&k.tr_mul(g));

    let delta_sq = (w_norm_sq
        - p.iter()
            .zip(lam.iter())
            .map(|(pi, li)| pi * pi / li)
            .sum::<f64>())
    .max(0.0);
    let delta = delta_sq.sqrt();
    if delta > eps * (1.0 + FEASIBILITY_TOL) {
        return Err(Error::InfeasibleData {
            delta,
            epsilon: eps,
        });
    }
    let slack = eps * eps - delta_sq;
    if slack <= DEGENERATE_SLACK * eps * eps.max(w_norm_sq.sqrt()).max(f64::MIN_POSITIVE) {
        // Single admissible point x0 = -M^{-1} K^T w.
        let c_star: f64 = (0..kn)
            .map(|i| {
                let x0 = -p[i] / lam[i];
                x0 * x0 - 2.0 * x0 * q[i]
            })
            .sum();
        return Ok(cert(
            delta_terms + c_star,
            c_star,
            f64::INFINITY,
            1.0 / lam_min,
            0.0,
            false,
            delta,
        ));
    }

    let d_min = 1.0 / lam_min;
    let cluster: Vec<bool> = lam
        .iter()
        .map(|&l| l - lam_min <= CLUSTER_TOL * lam_max)
        .collect();
    let scale = d_min * w_norm_sq.sqrt() + g.norm() + h_norm_sq.sqrt();
    let hard_case = (0..kn)
        .filter(|&i| cluster[i])
        .all(|i| (d_min * p[i] + q[i]).abs() <= HARD_CASE_TOL * scale.max(f64::MIN_POSITIVE));
    let dual = Dual {
        lam: lam.iter().cloned().collect(),
        gap: (0..kn)
            .map(|i| {
                if cluster[i] {
                    0.0
                } else {
                    (lam[i] - lam_min) / lam_min
                }
            })
            .collect(),
        p: p.iter().cloned().collect(),
        q: q.iter().cloned().collect(),
        d_min,
        linear: eps * eps - w_norm_sq,
        hard: if hard_case {
            cluster.clone()
        } else {
            vec![false; kn]
        },
    };

    let lo = if hard_case {
        0.0
    } else {
        1e-12 * (1.0 + d_min)
    };
    if hard_case {
        let (f0, df0, _) = dual.terms(0.0);
        if df0 >= 0.0 {
            return Ok(cert(delta_terms + f0, f0, d_min, d_min, df0, true, delta));
        }
    }

    let mut hi = d_min.max(1.0);
    let mut f_hi = dual.value(hi);
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        let f_next = dual.value(2.0 * hi);
        if f_next >= f_hi || !f_next.is_finite() {
            break;
        }
        hi *= 2.0;
        f_hi = f_next;
    }
    let upper = 2.0 * hi;
    let t_gs = golden_section(|t| dual.value(t), lo, upper);
    let t_star = newton_polish(&dual, t_gs, lo, upper);
    let (mut c_star, mut grad, _) = dual.terms(t_star);
    let mut t_final = t_star;
    // Newton's point is kept unless golden section is better beyond round-off.
    let f_gs = dual.value(t_gs);
    if f_gs < c_star - 1e-12 * c_star.abs().max(f64::MIN_POSITIVE) {
        c_star = f_gs;
        grad = dual.terms(t_gs).1;
        t_final = t_gs;
    }
    Ok(cert(
        delta_terms + c_star,
        c_star,
        d_min + t_final,
        d_min,
        grad,
        false,
        delta,
    ))
}

/// Lower bound on the local worst-case error by direct search over the
/// admissible ellipsoid, for `N - m <= 3`.
///
/// Admissible elements are `h + K x` with `x = x_c + rho * r * L^{-T} s`,
/// where `M = L L^T`, `s` runs over a nested angular grid of the unit sphere
/// and `rho` over a few radial levels. The best boundary sample is then
/// refined by a compass search in angle space.
pub fn brute_force_wce(
    obs: &ObservationSetup,
    model: &ModelSet,
    y: &DVector<f64>,
    g: &DVector<f64>,
    grid_resolution: usize,
) -> Result<f64> {
    let k = obs.kernel_basis();
    let kn = k.ncols();
    if kn > MAX_BRUTE_FORCE_DIM {
        return Err(Error::SearchDimensionTooLarge {
            dim: kn,
            max: MAX_BRUTE_FORCE_DIM,
        });
    }
    if g.len() != obs.dim() {
        return Err(Error::DimensionMismatch {
            context: "recovery output",
            expected: obs.dim(),
            found: g.len(),
        });
    }
    let diag = check_model_assumption(obs, model);
    if !diag.ok {
        return Err(Error::ModelAssumptionViolated {
            sigma_min: diag.sigma_min,
        });
    }
    let eps = model.epsilon();
    let h = interpolant(obs, y)?;
    let w = model.residual(&h);
    if kn == 0 {
        let delta = w.norm();
        if delta > eps * (1.0 + FEASIBILITY_TOL) {
            return Err(Error::InfeasibleData {
                delta,
                epsilon: eps,
            });
        }
        return Ok((&h - g).norm());
    }

    let a = model.residual_columns(k);
    let m_mat = a.tr_mul(&a);
    let chol = Cholesky::new(m_mat).ok_or(Error::ModelAssumptionViolated { sigma_min: 0.0 })?;
    let x_c = -chol.solve(&a.tr_mul(&w));
    let delta = (&a * &x_c + &w).norm();
    if delta > eps * (1.0 + FEASIBILITY_TOL) {
        return Err(Error::InfeasibleData {
            delta,
            epsilon: eps,
        });
    }
    let radius = (eps * eps - delta * delta).max(0.0).sqrt();
    let l_t = chol.l().transpose();

    let objective = |s: &DVector<f64>, rho: f64| -> f64 {
        let z = l_t
            .solve_upper_triangular(s)
            .unwrap_or_else(|| DVector::zeros(kn));
        let x = &x_c + z * (rho * radius);
        (&h + k * x - g).norm_squared()
    };

    let res = grid_resolution.max(2);
    let radial_levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut best = f64::NEG_INFINITY;
    let mut best_angles: Vec<f64> = Vec::new();
    let consider = |angles: Vec<f64>, best: &mut f64, best_angles: &mut Vec<f64>| {
        let s = sphere_point(kn, &angles);
        for &rho in &radial_levels {
            let val = objective(&s, rho);
            if val > *best {
                *best = val;
                if rho == 1.0 {
                    *best_angles = angles.clone();
                }
            }
        }
    };
    match kn {
        1 => {
            for sign in [0.0, 1.0] {
                consider(vec![sign], &mut best, &mut best_angles);
            }
            // Interior samples along the segment.
            for j in 0..=res {
                let rho = j as f64 / res as f64;
                for sign in [-1.0, 1.0] {
                    let val = objective(&DVector::from_element(1, sign), rho);
                    best = best.max(val);
                }
            }
        }
        2 => {
            for j in 0..res {
                let theta = std::f64::consts::TAU * j as f64 / res as f64;
                consider(vec![theta], &mut best, &mut best_angles);
            }
        }
        _ => {
            for j in 0..=res {
                let polar = std::f64::consts::PI * j as f64 / res as f64;
                for l in 0..res {
                    let azimuth = std::f64::consts::TAU * l as f64 / res as f64;
                    consider(vec![polar, azimuth], &mut best, &mut best_angles);
                }
            }
        }
    }

    if kn >= 2 && !best_angles.is_empty() {
        let boundary = |angles: &[f64]| objective(&sphere_point(kn, angles), 1.0);
        let mut angles = best_angles;
        let mut current = boundary(&angles);
        let mut step = std::f64::consts::TAU / res as f64;
        while step > 1e-13 {
            let mut improved = false;
            for axis in 0..angles.len() {
                for dir in [1.0, -1.0] {
                    let mut trial = angles.clone();
                    trial[axis] += dir * step;
                    let val = boundary(&trial);
                    if val > current {
                        current = val;
                        angles = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(current);
    }
    Ok(best.max(0.0).sqrt())
}

/// Unit-sphere point for the given angles. In one dimension the single
/// "angle" selects the sign (`0` for `+1`, anything else `-1`).
fn sphere_point(dim: usize, angles: &[f64]) -> DVector<f64> {
    match dim {
        1 => DVector::from_element(1, if angles[0] == 0.0 { 1.0 } else { -1.0 }),
        2 => DVector::from_vec(vec![angles[0].cos(), angles[0].sin()]),
        _ => {
            let (polar, azimuth) = (angles[0], angles[1]);
            DVector::from_vec(vec![
                polar.sin() * azimuth.cos(),
                polar.sin() * azimuth.sin(),
                polar.cos(),
            ])
        }
    }
}
