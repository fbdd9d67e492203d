//! CSV ingestion and emission, non-IID splitting and feature standardization.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression data: one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub targets: DVector<f64>,
    /// Names of the feature columns, in file order.
    pub column_names: Vec<String>,
    pub target_name: String,
}

/// Selects the target column by header name or by 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl TargetColumn {
    /// A header name wins over a numeric interpretation of the same string.
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            TargetColumn::Name(name) => {
                if let Some(pos) = header.iter().position(|h| h == name) {
                    return Ok(pos);
                }
                match name.parse::<usize>() {
                    Ok(idx) => TargetColumn::Index(idx).resolve(header),
                    Err(_) => Err(Error::InvalidInput(format!(
                        "target column {name:?} not found in header"
                    ))),
                }
            }
            TargetColumn::Index(idx) => {
                if *idx == 0 || *idx > header.len() {
                    return Err(Error::IndexOutOfRange {
                        index: *idx,
                        len: header.len(),
                    });
                }
                Ok(idx - 1)
            }
        }
    }
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(TargetColumn::Name(s.to_string()))
    }
}

/// A loaded dataset plus ingestion diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    /// Rows skipped because a used cell was missing or non-finite.
    pub dropped_rows: usize,
    /// Columns skipped because no cell in them is numeric.
    pub skipped_columns: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    if c.is_empty() || c == "?" {
        return true;
    }
    matches!(
        c.to_ascii_lowercase().as_str(),
        "nan"
            | "na"
            | "n/a"
            | "null"
            | "inf"
            | "+inf"
            | "-inf"
            | "infinity"
            | "+infinity"
            | "-infinity"
    )
}

/// Reads a comma-delimited file with a header row.
///
/// Rows with a missing or non-finite cell in a used column are dropped and
/// counted. Columns with no numeric cell at all (e.g. identifiers) are
/// skipped; any other unparseable cell is an error.
pub fn load_csv(path: &Path, target: &TargetColumn) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = target.resolve(&header)?;

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let numeric: Vec<bool> = (0..header.len())
        .map(|j| {
            records
                .iter()
                .any(|(_, r)| !is_missing(&r[j]) && r[j].parse::<f64>().is_ok())
        })
        .collect();
    if !numeric[target_idx] {
        return Err(Error::InvalidInput(format!(
            "target column {:?} has no numeric values",
            header[target_idx]
        )));
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != target_idx && numeric[j])
        .collect();
    let skipped_columns = (0..header.len())
        .filter(|&j| !numeric[j])
        .map(|j| header[j].clone())
        .collect();

    let mut feats = Vec::new();
    let mut targets = Vec::new();
    let mut dropped_rows = 0;
    'rows: for (line, rec) in &records {
        let mut row = Vec::with_capacity(feature_cols.len());
        for &j in feature_cols.iter().chain(std::iter::once(&target_idx)) {
            let cell = &rec[j];
            if is_missing(cell) {
                dropped_rows += 1;
                continue 'rows;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: *line,
                column: j + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                dropped_rows += 1;
                continue 'rows;
            }
            row.push(v);
        }
        targets.push(row.pop().expect("target cell"));
        feats.extend(row);
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = targets.len();
    let d = feature_cols.len();
    Ok(LoadedCsv {
        dataset: Dataset {
            features: DMatrix::from_row_slice(rows, d, &feats),
            targets: DVector::from_vec(targets),
            column_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
            target_name: header[target_idx].clone(),
        },
        dropped_rows,
        skipped_columns,
    })
}

/// Reads the named columns of a headed CSV file as a feature matrix, in the
/// given order. Every cell must be a finite number.
pub fn load_feature_matrix(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::InvalidInput(format!("column {n:?} not found in header")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        for &j in &cols {
            let cell = rec.get(j).unwrap_or("");
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("expected a finite number, found {cell:?}"),
                })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(DMatrix::from_row_slice(rows, cols.len(), &data))
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(line);
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        targets: DVector<f64>,
        column_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows",
                expected: features.nrows(),
                found: targets.len(),
            });
        }
        if column_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                context: "dataset column names",
                expected: features.ncols(),
                found: column_names.len(),
            });
        }
        if features
            .iter()
            .chain(targets.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("dataset has non-finite entries".into()));
        }
        Ok(Self {
            features,
            targets,
            column_names,
            target_name,
        })
    }

    /// Dataset with generated column names `x1..xd` and target `y`.
    pub fn from_arrays(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(features, targets, names, "y".into())
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn features_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at the given indices, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let d = self.features.ncols();
        let features = DMatrix::from_fn(idx.len(), d, |i, j| self.features[(idx[i], j)]);
        let targets = DVector::from_fn(idx.len(), |i, _| self.targets[idx[i]]);
        Self {
            features,
            targets,
            column_names: self.column_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Writes features followed by the target column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header: Vec<String> = self.column_names.clone();
        header.push(self.target_name.clone());
        let rows: Vec<Vec<f64>> = (0..self.rows())
            .map(|i| {
                let mut r: Vec<f64> = self.features.row(i).iter().cloned().collect();
                r.push(self.targets[i]);
                r
            })
            .collect();
        write_table(out, &header, &rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

/// Number of training rows: `ceil(frac * rows)`, guarded against round-off
/// such as `0.7 * 10 = 7.000000000000001`.
pub fn train_count(rows: usize, train_frac: f64) -> usize {
    let raw = train_frac * rows as f64;
    ((raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize).min(rows)
}

fn check_frac(train_frac: f64) -> Result<()> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    Ok(())
}

/// Sorts rows stably in descending order of the (1-based) `sort_feature`
/// and puts the first `ceil(train_frac * rows)` rows into the training set.
pub fn noniid_split(ds: &Dataset, sort_feature: usize, train_frac: f64) -> Result<Split> {
    let d = ds.features_dim();
    if sort_feature == 0 || sort_feature > d {
        return Err(Error::FeatureOutOfRange {
            feature: sort_feature,
            features: d,
        });
    }
    check_frac(train_frac)?;
    let rows = ds.rows();
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let col = sort_feature - 1;
    let mut order: Vec<usize> = (0..rows).collect();
    // Values are finite; `partial_cmp` keeps -0.0 and 0.0 tied.
    order.sort_by(|&a, &b| {
        ds.features[(b, col)]
            .partial_cmp(&ds.features[(a, col)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n_train = train_count(rows, train_frac);
    if n_train == 0 || n_train == rows {
        return Err(Error::DegenerateSplit(format!(
            "{rows} rows at train fraction {train_frac} leave an empty side"
        )));
    }
    Ok(Split {
        train: ds.select_rows(&order[..n_train]),
        test: ds.select_rows(&order[n_train..]),
    })
}

/// Per-feature z-scoring with statistics taken from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &DMatrix<f64>) -> Result<Self> {
        let rows = features.nrows();
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mean = Vec::with_capacity(features.ncols());
        let mut scale = Vec::with_capacity(features.ncols());
        for col in features.column_iter() {
            let mu = col.sum() / rows as f64;
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / rows as f64;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "standardizer features",
                expected: self.mean.len(),
                found: features.ncols(),
            });
        }
        Ok(DMatrix::from_fn(
            features.nrows(),
            features.ncols(),
            |i, j| (features[(i, j)] - self.mean[j]) / self.scale[j],
        ))
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.transform(&ds.features)?,
            ..ds.clone()
        })
    }
}

/// Formats a float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header and rows of floats as comma-separated values with LF
/// line endings.
pub fn write_table<W: Write, S: AsRef<str>>(out: W, header: &[S], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header.iter().map(|h| h.as_ref()))
        .map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_f64(*x)))
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table to a file, creating parent directories as needed.
pub fn write_table_file<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_table(File::create(path)?, header, rows)
}
