//! `optrec`: worst-case-error sweeps, non-IID splits, kernel width search and
//! test-error comparisons for optimal recovery regression.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use optrec_core::dataset::{self, load_feature_matrix, write_table_file};
use optrec_core::experiments::{fit_method, prepare_split};
use optrec_core::rkhs::RecoveredFunction;
use optrec_core::{
    compare, load_csv, noniid_split, sigma_grid_search, wce_sweep, Dataset, Dims, ErrorClass,
    ExperimentConfig, FitMethod, Standardizer, TargetColumn,
};

#[derive(Parser)]
#[command(
    name = "optrec",
    version,
    about = "Optimal recovery regression experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case errors of OR and ERM baselines on a random instance, per epsilon.
    WceSweep(WceSweepArgs),
    /// Non-IID train/test split (writes train.csv and test.csv into --output).
    Split(SplitArgs),
    /// Kernel width selection on the training part of a non-IID split.
    Gridsearch(GridArgs),
    /// Fits a model on a whole file and stores it as JSON.
    Fit(FitArgs),
    /// Predicts with a stored model.
    Predict(PredictArgs),
    /// Test error of OR, ridgeless and Taylor-feature regression against dim(V).
    Compare(CompareArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Target column: header name or 1-based index.
    #[arg(long)]
    target: String,
}

#[derive(Args)]
struct SplitOpts {
    /// 1-based feature (among non-target columns) to sort on, descending.
    #[arg(long, default_value_t = 5)]
    sort_feature: usize,
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
}

#[derive(Args)]
struct WceSweepArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
    )]
    epsilon_grid: Vec<f64>,
    /// n,N,m: dim(V), ambient dimension, number of observations.
    #[arg(long, value_delimiter = ',', default_value = "20,200,50")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitOpts,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitOpts,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4,8")]
    sigma_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    taylor_degree: usize,
    #[arg(long, value_enum, default_value_t = Method::Or)]
    method: Method,
    /// Number of Taylor features spanning V (default: all of the given degree).
    #[arg(long)]
    dim_v: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
enum Method {
    Or,
    Ridgeless,
    TaylorErm2,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    taylor_degree: usize,
    #[arg(long, value_enum, default_value_t = Method::Or)]
    method: Method,
    #[arg(long)]
    dim_v: Option<usize>,
    /// Model JSON file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// CSV file containing the model's feature columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitOpts,
    /// Fixed kernel width; without it the width is chosen from --sigma-grid.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4,8")]
    sigma_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    taylor_degree: usize,
    /// Rows drawn (without replacement) before each Monte Carlo run.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 40)]
    mc_runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Curve CSV; run metadata goes to the same path with a `.meta.json` suffix.
    #[arg(long)]
    output: PathBuf,
}

/// A fitted model as stored on disk.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    method: Method,
    feature_names: Vec<String>,
    target_name: String,
    standardizer: Standardizer,
    function: RecoveredFunction,
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let loaded = load_csv(&data.input, &TargetColumn::Name(data.target.clone()))?;
    if loaded.dropped_rows > 0 {
        eprintln!("dropped {} rows with missing values", loaded.dropped_rows);
    }
    if !loaded.skipped_columns.is_empty() {
        eprintln!(
            "skipped non-numeric columns: {}",
            loaded.skipped_columns.join(", ")
        );
    }
    Ok(loaded.dataset)
}

fn method_for(method: Method, dim_v: Option<usize>, d: usize, degree: usize) -> Result<FitMethod> {
    let full = optrec_core::TaylorBasisSpec::new(d, degree, 1.0)?.len();
    let dim_v = dim_v.unwrap_or(full);
    if dim_v > full {
        bail!(optrec_core::Error::IndexOutOfRange {
            index: dim_v,
            len: full
        });
    }
    Ok(match method {
        Method::Or => FitMethod::Optimal { dim_v },
        Method::Ridgeless => FitMethod::Ridgeless,
        Method::TaylorErm2 => FitMethod::TaylorErm2 { dim_v },
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::WceSweep(a) => {
            let [n, big_n, m] = a.dims[..] else {
                bail!(optrec_core::Error::InvalidInput(
                    "--dims expects three values n,N,m".into()
                ));
            };
            let cfg = ExperimentConfig {
                epsilon_grid: a.epsilon_grid,
                dims: Dims { n, big_n, m },
                seed: a.seed,
                ..Default::default()
            };
            let sweep = wce_sweep(&cfg)?;
            write_table_file(&a.output, &optrec_core::WceSweep::HEADER, &sweep.table())?;
            eprintln!(
                "linear fit R^2 of wce_or vs epsilon: {:.6}",
                sweep.or_linear_r2
            );
        }
        Command::Split(a) => {
            let ds = load(&a.data)?;
            let split = noniid_split(&ds, a.split.sort_feature, a.split.train_frac)?;
            fs::create_dir_all(&a.output)?;
            split
                .train
                .write_csv(create(&a.output.join("train.csv"))?)?;
            split.test.write_csv(create(&a.output.join("test.csv"))?)?;
            eprintln!(
                "train {} rows, test {} rows",
                split.train.rows(),
                split.test.rows()
            );
        }
        Command::Gridsearch(a) => {
            let ds = load(&a.data)?;
            let cfg = ExperimentConfig {
                sigma_grid: a.sigma_grid,
                taylor_degree: a.taylor_degree,
                sort_feature: a.split.sort_feature,
                train_frac: a.split.train_frac,
                ..Default::default()
            };
            let (train, _, _) = prepare_split(&ds, &cfg)?;
            let method = method_for(a.method, a.dim_v, ds.features_dim(), a.taylor_degree)?;
            let gs = sigma_grid_search(&train, &cfg, method)?;
            let rows: Vec<Vec<f64>> = gs.table.iter().map(|&(s, e)| vec![s, e]).collect();
            write_table_file(&a.output, &["sigma", "validation_mse"], &rows)?;
            println!("best_sigma={}", dataset::format_f64(gs.best_sigma));
        }
        Command::Fit(a) => {
            let ds = load(&a.data)?;
            let st = Standardizer::fit(&ds.features)?;
            let z = st.apply(&ds)?;
            let method = method_for(a.method, a.dim_v, ds.features_dim(), a.taylor_degree)?;
            let function = fit_method(method, a.sigma, a.taylor_degree, &z)?;
            write_json(
                &a.output,
                &ModelFile {
                    method: a.method,
                    feature_names: ds.column_names.clone(),
                    target_name: ds.target_name.clone(),
                    standardizer: st,
                    function,
                },
            )?;
        }
        Command::Predict(a) => {
            let text = fs::read_to_string(&a.model)
                .with_context(|| format!("reading {}", a.model.display()))?;
            let model: ModelFile = serde_json::from_str(&text).map_err(|e| {
                optrec_core::Error::InvalidInput(format!("{}: {e}", a.model.display()))
            })?;
            let x = load_feature_matrix(&a.input, &model.feature_names)?;
            let z = model.standardizer.transform(&x)?;
            let pred = model.function.evaluate_many(&z)?;
            let rows: Vec<Vec<f64>> = pred.iter().map(|p| vec![*p]).collect();
            write_table_file(
                &a.output,
                &[format!("predicted_{}", model.target_name)],
                &rows,
            )?;
        }
        Command::Compare(a) => {
            let ds = load(&a.data)?;
            let cfg = ExperimentConfig {
                sigma_grid: a.sigma_grid,
                taylor_degree: a.taylor_degree,
                sort_feature: a.split.sort_feature,
                train_frac: a.split.train_frac,
                subsample: a.subsample,
                mc_runs: a.mc_runs,
                seed: a.seed,
                ..Default::default()
            };
            let result = compare(&ds, &cfg, a.sigma)?;
            let (header, rows) = result.curve.table();
            write_table_file(&a.output, &header, &rows)?;
            let mut meta = a.output.clone().into_os_string();
            meta.push(".meta.json");
            write_json(
                Path::new(&meta),
                &serde_json::json!({
                    "sigma": result.curve.sigma,
                    "runs": result.curve.runs,
                    "or_train_mse": result.curve.or_train_mse,
                    "standardization": "z-score with training-split statistics (first run)",
                    "standardizer": result.standardizer,
                    "grid_search": result.grid,
                    "config": cfg,
                }),
            )?;
            eprintln!("sigma = {}", result.curve.sigma);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<optrec_core::Error>().map(|e| e.class()) {
        Some(ErrorClass::Numerical) => 3,
        Some(ErrorClass::Infeasible) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
