//! Experiment drivers: worst-case-error sweeps on random instances, kernel
//! width selection and test-error curves against `dim(V)`.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`;
//! independent tasks use separate streams of the same seed, so results do
//! not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{noniid_split, Dataset, Standardizer};
use crate::erm::{erm1, erm2, erm2_constrained};
use crate::error::{Error, Result};
use crate::hilbert::{ModelSet, ObservationSetup};
use crate::linalg;
use crate::recovery::optimal_recover;
use crate::rkhs::{
    fit_optimal, fit_ridgeless, fit_taylor_erm2, KernelSpec, RecoveredFunction, TaylorBasisSpec,
};
use crate::worst_case::local_wce;

/// Sizes of a random instance: `n = dim(V)`, ambient `N`, `m` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub big_n: usize,
    pub m: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            n: 20,
            big_n: 200,
            m: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sigma_grid: Vec<f64>,
    pub taylor_degree: usize,
    pub epsilon_grid: Vec<f64>,
    /// 1-based feature used for the non-IID sort.
    pub sort_feature: usize,
    pub train_frac: f64,
    pub subsample: Option<usize>,
    pub mc_runs: usize,
    pub seed: u64,
    pub dims: Dims,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sigma_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            taylor_degree: 1,
            epsilon_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            sort_feature: 5,
            train_frac: 0.7,
            subsample: None,
            mc_runs: 40,
            seed: 0,
            dims: Dims::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |g: &[f64]| !g.is_empty() && g.iter().all(|s| *s > 0.0 && s.is_finite());
        if !positive(&self.sigma_grid) {
            return Err(Error::InvalidInput(
                "sigma grid must be non-empty with positive entries".into(),
            ));
        }
        if !positive(&self.epsilon_grid) {
            return Err(Error::InvalidInput(
                "epsilon grid must be non-empty with positive entries".into(),
            ));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidInput(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        if self.mc_runs == 0 {
            return Err(Error::InvalidInput("mc_runs must be >= 1".into()));
        }
        let Dims { n, big_n, m } = self.dims;
        if !(n <= m && m <= big_n) || m == 0 {
            return Err(Error::InvalidInput(format!(
                "dims must satisfy n <= m <= N with m >= 1, got n={n}, N={big_n}, m={m}"
            )));
        }
        Ok(())
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// A random recovery instance with model-consistent data.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub obs: ObservationSetup,
    /// `V` with orthonormal basis; its `epsilon` is the smallest admissible radius.
    pub model: ModelSet,
    pub f0: DVector<f64>,
    pub y: DVector<f64>,
}

/// Gaussian representers, an orthonormalized Gaussian basis of `V`, and
/// `y = L f0` with `f0 = v + eps_min * e`, `e` a unit vector orthogonal to `V`.
pub fn random_instance(dims: Dims, eps_min: f64, seed: u64) -> Result<RandomInstance> {
    let Dims { n, big_n, m } = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = ObservationSetup::new(gaussian_matrix(&mut rng, m, big_n))?;
    let v = linalg::orthonormal_columns(&gaussian_matrix(&mut rng, big_n, n), "V basis")?;
    let model = ModelSet::new(v, eps_min)?;
    let z = gaussian_matrix(&mut rng, n, 1).column(0).into_owned();
    let mut e = model.residual(&gaussian_matrix(&mut rng, big_n, 1).column(0).into_owned());
    let norm = e.norm();
    if norm > 0.0 {
        e /= norm;
    }
    let f0 = model.combine(&z) + e * eps_min;
    let y = obs.observe(&f0);
    Ok(RandomInstance { obs, model, f0, y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WceRow {
    pub epsilon: f64,
    pub wce_or: f64,
    pub wce_erm1: f64,
    pub wce_erm2: f64,
    pub wce_erm2_constrained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WceSweep {
    pub rows: Vec<WceRow>,
    /// Coefficient of determination of a straight-line fit of `wce_or` on `epsilon`.
    pub or_linear_r2: f64,
}

impl WceSweep {
    pub const HEADER: [&'static str; 5] = [
        "epsilon",
        "wce_or",
        "wce_erm1",
        "wce_erm2",
        "wce_erm2_constrained",
    ];

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.epsilon,
                    r.wce_or,
                    r.wce_erm1,
                    r.wce_erm2,
                    r.wce_erm2_constrained,
                ]
            })
            .collect()
    }
}

/// Worst-case errors of OR, ERM1, ERM2 (in `V`) and ERM2 constrained to the
/// model set, for each radius of the grid on one random instance.
pub fn wce_sweep(cfg: &ExperimentConfig) -> Result<WceSweep> {
    cfg.validate()?;
    let mut grid = cfg.epsilon_grid.clone();
    grid.sort_by(f64::total_cmp);
    let inst = random_instance(cfg.dims, grid[0], cfg.seed)?;
    let (obs, y) = (&inst.obs, &inst.y);
    let g_or = optimal_recover(obs, &inst.model, y)?.assemble(obs, &inst.model);
    let g_erm1 = erm1(obs, &inst.model, y)?.assemble(&inst.model);
    let g_erm2 = erm2(obs, &inst.model, y)?.assemble(&inst.model);

    let rows = cfg
        .epsilon_grid
        .par_iter()
        .map(|&eps| {
            let model = inst.model.with_epsilon(eps)?;
            let g_c = erm2_constrained(obs, &model, y)?.f_hat;
            Ok(WceRow {
                epsilon: eps,
                wce_or: local_wce(obs, &model, y, &g_or)?.value,
                wce_erm1: local_wce(obs, &model, y, &g_erm1)?.value,
                wce_erm2: local_wce(obs, &model, y, &g_erm2)?.value,
                wce_erm2_constrained: local_wce(obs, &model, y, &g_c)?.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.wce_or).collect();
    Ok(WceSweep {
        rows,
        or_linear_r2: linear_r2(&xs, &ys),
    })
}

/// R^2 of the least-squares line through `(xs, ys)`; 1 for a perfect fit or
/// constant data.
pub fn linear_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 1.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Regression method fitted in the Gaussian RKHS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    /// Optimal recovery with `V` spanned by the first `dim_v` Taylor features.
    Optimal {
        dim_v: usize,
    },
    Ridgeless,
    /// Least squares on the first `dim_v` Taylor features.
    TaylorErm2 {
        dim_v: usize,
    },
}

impl FitMethod {
    fn dim_v(&self) -> usize {
        match self {
            FitMethod::Optimal { dim_v } | FitMethod::TaylorErm2 { dim_v } => *dim_v,
            FitMethod::Ridgeless => 0,
        }
    }
}

/// Fits `method` with kernel width `sigma` and Taylor features of `degree`.
pub fn fit_method(
    method: FitMethod,
    sigma: f64,
    degree: usize,
    train: &Dataset,
) -> Result<RecoveredFunction> {
    let d = train.features_dim();
    let kernel = KernelSpec::new(sigma, d)?;
    let full = TaylorBasisSpec::new(d, degree, sigma)?;
    let basis = full.truncated(method.dim_v())?;
    match method {
        FitMethod::Optimal { .. } => fit_optimal(kernel, basis, &train.features, &train.targets),
        FitMethod::Ridgeless => fit_ridgeless(kernel, &train.features, &train.targets),
        FitMethod::TaylorErm2 { dim_v: 0 } => Ok(RecoveredFunction {
            points: train.features.clone(),
            kernel,
            a: DVector::zeros(train.rows()),
            basis,
            b: DVector::zeros(0),
        }),
        FitMethod::TaylorErm2 { .. } => {
            fit_taylor_erm2(kernel, basis, &train.features, &train.targets)
        }
    }
}

/// Mean squared prediction error on `ds`.
pub fn mse(f: &RecoveredFunction, ds: &Dataset) -> Result<f64> {
    let pred = f.evaluate_many(&ds.features)?;
    Ok((pred - &ds.targets).norm_squared() / ds.rows() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_sigma: f64,
    /// `(sigma, validation_mse)` in increasing `sigma`; failed fits score `inf`.
    pub table: Vec<(f64, f64)>,
}

/// Picks the kernel width minimizing the validation error, where the
/// validation part is the last 20% of the training rows (keeping the
/// non-IID order) and `method` is fitted on the rest. Ties go to the smaller
/// width.
pub fn sigma_grid_search(
    train: &Dataset,
    cfg: &ExperimentConfig,
    method: FitMethod,
) -> Result<GridSearch> {
    let mut grid = cfg.sigma_grid.clone();
    if grid.is_empty() || grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidInput(
            "sigma grid must be non-empty with positive entries".into(),
        ));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rows = train.rows();
    let n_fit = crate::dataset::train_count(rows, 0.8);
    let n_params = method.dim_v();
    if n_fit < n_params + 1 || n_fit >= rows {
        return Err(Error::DegenerateSplit(format!(
            "{rows} training rows leave {n_fit} for fitting and {} for validation; need at least {} for fitting and 1 for validation",
            rows - n_fit,
            n_params + 1
        )));
    }
    let idx: Vec<usize> = (0..rows).collect();
    let fit = train.select_rows(&idx[..n_fit]);
    let val = train.select_rows(&idx[n_fit..]);
    let table: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&s| {
            let score = fit_method(method, s, cfg.taylor_degree, &fit)
                .and_then(|f| mse(&f, &val))
                .ok()
                .filter(|e| e.is_finite())
                .unwrap_or(f64::INFINITY);
            (s, score)
        })
        .collect();
    let mut best = table[0];
    for &(s, e) in &table[1..] {
        if e < best.1 {
            best = (s, e);
        }
    }
    Ok(GridSearch {
        best_sigma: best.0,
        table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dim_v: usize,
    pub mse_or: f64,
    pub mse_ridgeless: f64,
    pub mse_taylor_erm2: f64,
    /// Standard errors over Monte Carlo runs (0 for a single run).
    pub se_or: f64,
    pub se_ridgeless: f64,
    pub se_taylor_erm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub sigma: f64,
    pub rows: Vec<CurveRow>,
    /// Largest training MSE of the optimal recovery fits.
    pub or_train_mse: f64,
    pub runs: usize,
}

impl ErrorCurve {
    pub const HEADER: [&'static str; 4] = ["dim_v", "mse_or", "mse_ridgeless", "mse_taylor_erm2"];
    pub const HEADER_MC: [&'static str; 7] = [
        "dim_v",
        "mse_or",
        "mse_ridgeless",
        "mse_taylor_erm2",
        "se_or",
        "se_ridgeless",
        "se_taylor_erm2",
    ];

    /// Header and rows; the standard-error columns appear for multi-run curves.
    pub fn table(&self) -> (Vec<&'static str>, Vec<Vec<f64>>) {
        let mc = self.runs > 1;
        let header = if mc {
            Self::HEADER_MC.to_vec()
        } else {
            Self::HEADER.to_vec()
        };
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.dim_v as f64, r.mse_or, r.mse_ridgeless, r.mse_taylor_erm2];
                if mc {
                    v.extend([r.se_or, r.se_ridgeless, r.se_taylor_erm2]);
                }
                v
            })
            .collect();
        (header, rows)
    }
}

struct RunErrors {
    or: Vec<f64>,
    ridgeless: f64,
    taylor: Vec<f64>,
    or_train: f64,
}

fn curve_run(train: &Dataset, test: &Dataset, sigma: f64, degree: usize) -> Result<RunErrors> {
    let d = train.features_dim();
    let max_dim = TaylorBasisSpec::new(d, degree, sigma)?.len();
    let ridgeless = mse(
        &fit_method(FitMethod::Ridgeless, sigma, degree, train)?,
        test,
    )?;
    let mut or = Vec::with_capacity(max_dim + 1);
    let mut taylor = Vec::with_capacity(max_dim + 1);
    let mut or_train: f64 = 0.0;
    for dim_v in 0..=max_dim {
        let f = fit_method(FitMethod::Optimal { dim_v }, sigma, degree, train)?;
        or_train = or_train.max(mse(&f, train)?);
        or.push(mse(&f, test)?);
        let t = fit_method(FitMethod::TaylorErm2 { dim_v }, sigma, degree, train)?;
        taylor.push(mse(&t, test)?);
    }
    Ok(RunErrors {
        or,
        ridgeless,
        taylor,
        or_train,
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Test MSE of optimal recovery, ridgeless regression and Taylor-feature
/// least squares for `dim(V) = 0..=#features`, on a given split.
pub fn test_error_curve(
    train: &Dataset,
    test: &Dataset,
    sigma: f64,
    cfg: &ExperimentConfig,
) -> Result<ErrorCurve> {
    if train.features_dim() != test.features_dim() {
        return Err(Error::DimensionMismatch {
            context: "test features",
            expected: train.features_dim(),
            found: test.features_dim(),
        });
    }
    if test.rows() == 0 || train.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let run = curve_run(train, test, sigma, cfg.taylor_degree)?;
    Ok(aggregate(sigma, &[run]))
}

fn aggregate(sigma: f64, runs: &[RunErrors]) -> ErrorCurve {
    let dims = runs[0].or.len();
    let ridge: Vec<f64> = runs.iter().map(|r| r.ridgeless).collect();
    let (mse_ridgeless, se_ridgeless) = mean_se(&ridge);
    let rows = (0..dims)
        .map(|k| {
            let or: Vec<f64> = runs.iter().map(|r| r.or[k]).collect();
            let ta: Vec<f64> = runs.iter().map(|r| r.taylor[k]).collect();
            let (mse_or, se_or) = mean_se(&or);
            let (mse_taylor_erm2, se_taylor_erm2) = mean_se(&ta);
            CurveRow {
                dim_v: k,
                mse_or,
                mse_ridgeless,
                mse_taylor_erm2,
                se_or,
                se_ridgeless,
                se_taylor_erm2,
            }
        })
        .collect();
    ErrorCurve {
        sigma,
        rows,
        or_train_mse: runs.iter().map(|r| r.or_train).fold(0.0, f64::max),
        runs: runs.len(),
    }
}

/// Everything produced by a full comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub curve: ErrorCurve,
    /// Present when the width was chosen by grid search.
    pub grid: Option<GridSearch>,
    /// Standardization fitted on the training part of the first run.
    pub standardizer: Standardizer,
}

/// Prepared (split and standardized) data for one run.
pub fn prepare_split(
    ds: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(Dataset, Dataset, Standardizer)> {
    let split = noniid_split(ds, cfg.sort_feature, cfg.train_frac)?;
    let st = Standardizer::fit(&split.train.features)?;
    Ok((st.apply(&split.train)?, st.apply(&split.test)?, st))
}

fn subsample(ds: &Dataset, size: usize, seed: u64, run: usize) -> Result<Dataset> {
    if size > ds.rows() {
        return Err(Error::InvalidInput(format!(
            "subsample size {size} exceeds the {} available rows",
            ds.rows()
        )));
    }
    let mut rng = rng_stream(seed, run as u64);
    let mut idx = index::sample(&mut rng, ds.rows(), size).into_vec();
    idx.sort_unstable();
    Ok(ds.select_rows(&idx))
}

/// Non-IID split, training-statistics standardization, optional width
/// search (with optimal recovery on the full feature basis) and the test
/// error curve. With `cfg.subsample` set, each of `cfg.mc_runs` runs draws a
/// fresh subsample before splitting; the width is selected on the first.
pub fn compare(ds: &Dataset, cfg: &ExperimentConfig, sigma: Option<f64>) -> Result<Comparison> {
    cfg.validate()?;
    let runs = if cfg.subsample.is_some() {
        cfg.mc_runs
    } else {
        1
    };
    let prepared: Vec<(Dataset, Dataset, Standardizer)> = (0..runs)
        .into_par_iter()
        .map(|r| match cfg.subsample {
            Some(size) => prepare_split(&subsample(ds, size, cfg.seed, r)?, cfg),
            None => prepare_split(ds, cfg),
        })
        .collect::<Result<_>>()?;
    let (grid, sigma) = match sigma {
        Some(s) => (None, s),
        None => {
            let d = ds.features_dim();
            let dim_v = TaylorBasisSpec::new(d, cfg.taylor_degree, 1.0)?.len();
            let gs = sigma_grid_search(&prepared[0].0, cfg, FitMethod::Optimal { dim_v })?;
            let s = gs.best_sigma;
            (Some(gs), s)
        }
    };
    let results: Vec<RunErrors> = prepared
        .par_iter()
        .map(|(train, test, _)| curve_run(train, test, sigma, cfg.taylor_degree))
        .collect::<Result<_>>()?;
    Ok(Comparison {
        curve: aggregate(sigma, &results),
        grid,
        standardizer: prepared[0].2.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            dims: Dims {
                n: 3,
                big_n: 12,
                m: 6,
            },
            epsilon_grid: vec![0.1, 0.2, 0.4, 0.8],
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.sigma_grid.clear()));
        assert!(bad(|c| c.epsilon_grid = vec![0.0]));
        assert!(bad(|c| c.train_frac = 1.0));
        assert!(bad(|c| c.mc_runs = 0));
        assert!(bad(|c| c.dims = Dims {
            n: 5,
            big_n: 10,
            m: 4
        }));
        assert_eq!(
            Dims::default(),
            Dims {
                n: 20,
                big_n: 200,
                m: 50
            }
        );
    }

    #[test]
    fn random_instance_is_consistent() {
        let inst = random_instance(
            Dims {
                n: 3,
                big_n: 10,
                m: 5,
            },
            0.3,
            7,
        )
        .unwrap();
        assert!((inst.model.distance(&inst.f0) - 0.3).abs() < 1e-12);
        assert_eq!(inst.obs.observe(&inst.f0), inst.y);
        let again = random_instance(
            Dims {
                n: 3,
                big_n: 10,
                m: 5,
            },
            0.3,
            7,
        )
        .unwrap();
        assert_eq!(inst.y, again.y);
    }

    #[test]
    fn sweep_orders_and_monotone() {
        let s = wce_sweep(&small_cfg()).unwrap();
        assert_eq!(s.rows.len(), 4);
        for r in &s.rows {
            assert!(r.wce_or <= r.wce_erm1 * (1.0 + 1e-9));
            assert!(r.wce_or <= r.wce_erm2 * (1.0 + 1e-9));
            assert!(r.wce_or <= r.wce_erm2_constrained * (1.0 + 1e-9));
        }
        for w in s.rows.windows(2) {
            assert!(w[1].wce_or >= w[0].wce_or);
        }
        assert_eq!(s, wce_sweep(&small_cfg()).unwrap());
    }

    #[test]
    fn r2_examples() {
        assert!((linear_r2(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!(linear_r2(&[1.0, 2.0, 3.0], &[1.0, 3.0, 1.0]) < 1e-15);
    }

    fn bump_dataset(sigma0: f64) -> Dataset {
        // Equispaced points in [-3, 3]; the truth is the kernel section at a
        // fitting point, which the ridgeless fit at width sigma0 reproduces.
        let n = 25;
        let xs = DMatrix::from_fn(n, 1, |i, _| 3.0 - 6.0 * i as f64 / (n - 1) as f64);
        let ys = DVector::from_fn(n, |i, _| {
            (-(xs[(i, 0)] - 0.5).powi(2) / (2.0 * sigma0 * sigma0)).exp()
        });
        Dataset::from_arrays(xs, ys).unwrap()
    }

    #[test]
    fn grid_search_finds_bump_width() {
        let sigma0 = 0.6;
        let ds = bump_dataset(sigma0);
        let cfg = ExperimentConfig {
            sigma_grid: vec![4.0 * sigma0, sigma0, sigma0 / 4.0],
            ..Default::default()
        };
        let gs = sigma_grid_search(&ds, &cfg, FitMethod::Ridgeless).unwrap();
        assert_eq!(gs.best_sigma, sigma0);
        assert_eq!(gs.table.len(), 3);
        assert!(gs.table.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn grid_search_single_and_duplicates() {
        let ds = bump_dataset(0.6);
        let one = ExperimentConfig {
            sigma_grid: vec![0.3],
            ..Default::default()
        };
        assert_eq!(
            sigma_grid_search(&ds, &one, FitMethod::Ridgeless)
                .unwrap()
                .best_sigma,
            0.3
        );
        let dup = ExperimentConfig {
            sigma_grid: vec![0.6, 0.6, 0.6],
            ..Default::default()
        };
        let gs = sigma_grid_search(&ds, &dup, FitMethod::Ridgeless).unwrap();
        assert_eq!(gs.table.len(), 1);
        // a flat-scoring grid keeps the smaller width
        let tiny = Dataset::from_arrays(
            DMatrix::from_column_slice(5, 1, &[5.0, 4.0, 3.0, 2.0, 1.0]),
            DVector::zeros(5),
        )
        .unwrap();
        let cfg = ExperimentConfig {
            sigma_grid: vec![0.5, 0.2],
            ..Default::default()
        };
        assert_eq!(
            sigma_grid_search(&tiny, &cfg, FitMethod::Ridgeless)
                .unwrap()
                .best_sigma,
            0.2
        );
        assert!(matches!(
            sigma_grid_search(&tiny, &cfg, FitMethod::Optimal { dim_v: 4 }),
            Err(Error::DegenerateSplit(_))
        ));
    }

    fn synthetic(rows: usize, d: usize, sigma: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_matrix(&mut rng, rows, d);
        let basis = TaylorBasisSpec::new(d, 1, sigma).unwrap();
        let coef: Vec<f64> = (0..basis.len()).map(|j| 1.0 + j as f64).collect();
        let c = crate::rkhs::cross_gram(&basis, &x).unwrap();
        let y = c * DVector::from_vec(coef);
        Dataset::from_arrays(x, y).unwrap()
    }

    #[test]
    fn curve_basics() {
        let ds = synthetic(60, 2, 0.5, 3);
        let cfg = ExperimentConfig {
            sort_feature: 1,
            ..Default::default()
        };
        let split = noniid_split(&ds, 1, 0.7).unwrap();
        let curve = test_error_curve(&split.train, &split.test, 0.5, &cfg).unwrap();
        assert_eq!(curve.rows.len(), 4);
        assert_eq!(curve.rows[0].mse_or, curve.rows[0].mse_ridgeless);
        assert!(curve.or_train_mse < 1e-10);
        // truth lies in V at full dimension
        let last = curve.rows[3];
        assert!(last.mse_taylor_erm2 < 1e-16, "{last:?}");
        assert!(last.mse_or < 1e-12, "{last:?}");
        let (header, rows) = curve.table();
        assert_eq!(header.len(), 4);
        assert_eq!(rows[2][0], 2.0);
    }

    #[test]
    fn compare_is_deterministic_with_monte_carlo() {
        let ds = synthetic(80, 2, 0.5, 5);
        let cfg = ExperimentConfig {
            sort_feature: 2,
            subsample: Some(40),
            mc_runs: 3,
            sigma_grid: vec![0.25, 0.5],
            seed: 11,
            ..Default::default()
        };
        let a = compare(&ds, &cfg, None).unwrap();
        let b = compare(&ds, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curve.runs, 3);
        assert!(a.grid.is_some());
        assert!(a.curve.rows.iter().all(|r| r.se_or >= 0.0));
        assert_eq!(a.curve.table().0.len(), 7);
    }
}
