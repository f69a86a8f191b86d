//! Row cleaning and the log / standardization transform chain.
//!
//! Raw rows are filtered for missing cells, negative feature values and
//! duplicated coordinates, then every feature column is log-transformed
//! (pH columns as `ln(10^-pH)`), centered and scaled to unit population
//! standard deviation. The fitted [`Scaler`] replays the same chain on
//! query vectors.

mod csv_io;
mod synthetic;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use csv_io::{is_missing_token, read_dataset_csv, read_raw_csv, write_dataset_csv, write_raw_csv};
pub use synthetic::{gen_synthetic, SyntheticTable};

/// Uncleaned table as ingested. Missing cells are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    /// Feature column names, in file order (coordinates excluded).
    pub feature_names: Vec<String>,
    /// Per-row `[lon, lat]` when the table carries coordinates.
    pub coords: Option<Vec<[f64; 2]>>,
    /// Row-major `N × D_raw` feature cells; NaN marks a missing cell.
    pub cells: Vec<f64>,
}

impl RawTable {
    pub fn new(feature_names: Vec<String>, coords: Option<Vec<[f64; 2]>>, cells: Vec<f64>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::Schema("table has no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if matches!(name.to_ascii_lowercase().as_str(), "lon" | "lat") && coords.is_some() {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        if cells.len() % d != 0 {
            return Err(Error::Schema(format!("{} cells do not fill rows of width {d}", cells.len())));
        }
        if let Some(c) = &coords {
            if c.len() != cells.len() / d {
                return Err(Error::DimensionMismatch { expected: cells.len() / d, actual: c.len() });
            }
        }
        Ok(Self { feature_names, coords, cells })
    }

    pub fn num_rows(&self) -> usize {
        if self.feature_names.is_empty() {
            0
        } else {
            self.cells.len() / self.feature_names.len()
        }
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.feature_names.len();
        &self.cells[i * d..(i + 1) * d]
    }
}

/// Clean feature matrix with optional coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub coords: Option<Vec<[f64; 2]>>,
    pub features: Matrix,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, feature_names: Vec<String>, coords: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::Schema(format!(
                "dataset must have at least one row and one column (got {} x {})",
                features.rows(),
                features.cols()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch { expected: features.cols(), actual: feature_names.len() });
        }
        if let Some(c) = &coords {
            if c.len() != features.rows() {
                return Err(Error::DimensionMismatch { expected: features.rows(), actual: c.len() });
            }
        }
        for (i, r) in features.iter_rows().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j });
            }
        }
        Ok(Self { coords, features, feature_names })
    }

    /// Builds a dataset from feature rows with generated column names `f0, f1, ...`.
    pub fn from_matrix(features: Matrix) -> Result<Self> {
        let names = (0..features.cols()).map(|j| format!("f{j}")).collect();
        Self::new(features, names, None)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }
}

/// Rows removed by [`clean`], by reason. A row is counted under the first
/// rule it fails, in the order missing, negative, duplicate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanSummary {
    pub missing: usize,
    pub negative: usize,
    pub duplicate: usize,
}

impl std::fmt::Display for CleanSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "removed rows: missing={} negative={} duplicate={}", self.missing, self.negative, self.duplicate)
    }
}

/// Drops rows with missing cells, negative feature values, or coordinates
/// already seen (bitwise) on an earlier surviving row.
pub fn clean(raw: &RawTable) -> Result<(Dataset, CleanSummary)> {
    let d = raw.num_features();
    if d == 0 {
        return Err(Error::Schema("table has no feature columns".into()));
    }
    let n = raw.num_rows();
    let mut summary = CleanSummary::default();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut kept = Vec::new();
    let mut kept_coords = raw.coords.as_ref().map(|_| Vec::new());

    for i in 0..n {
        let row = raw.row(i);
        let coord = raw.coords.as_ref().map(|c| c[i]);
        let coord_missing = coord.is_some_and(|[lon, lat]| !lon.is_finite() || !lat.is_finite());
        if coord_missing || row.iter().any(|v| !v.is_finite()) {
            summary.missing += 1;
            continue;
        }
        if row.iter().any(|&v| v < 0.0) {
            summary.negative += 1;
            continue;
        }
        if let Some([lon, lat]) = coord {
            if !seen.insert((lon.to_bits(), lat.to_bits())) {
                summary.duplicate += 1;
                continue;
            }
        }
        kept.extend_from_slice(row);
        if let (Some(out), Some(c)) = (kept_coords.as_mut(), coord) {
            out.push(c);
        }
    }

    if kept.is_empty() {
        return Err(Error::AllRowsRemoved(n));
    }
    let rows = kept.len() / d;
    let features = Matrix::new(rows, d, kept)?;
    let ds = Dataset::new(features, raw.feature_names.clone(), kept_coords)?;
    Ok((ds, summary))
}

/// Logarithm applied before standardization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Ten => v.log10(),
        }
    }

    /// `log(10^-p)` evaluated in closed form.
    fn log_ph(self, p: f64) -> f64 {
        match self {
            LogBase::Natural => -p * std::f64::consts::LN_10,
            LogBase::Ten => -p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerColumn {
    pub name: String,
    pub is_ph: bool,
    pub mean: f64,
    /// Population standard deviation of the logged column; always > 0.
    pub std: f64,
    #[serde(default = "default_true")]
    pub log_applied: bool,
}

fn default_true() -> bool {
    true
}

/// Per-column transform parameters, in dataset feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    #[serde(default)]
    pub log_base: LogBase,
    pub columns: Vec<ScalerColumn>,
}

impl Scaler {
    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    /// Log step only (no centering), for column `j`.
    fn log_step(&self, j: usize, v: f64, row: usize) -> Result<f64> {
        let col = &self.columns[j];
        if !col.log_applied {
            return Ok(v);
        }
        if col.is_ph {
            return Ok(self.log_base.log_ph(v));
        }
        if v <= 0.0 || v.is_nan() {
            return Err(Error::NonPositive { column: col.name.clone(), row, value: v });
        }
        Ok(self.log_base.log(v))
    }
}

/// Fits the transform chain with natural logs. See [`fit_transform_with`].
pub fn fit_transform(data: &Dataset, ph_columns: &[&str]) -> Result<(Dataset, Scaler)> {
    fit_transform_with(data, ph_columns, LogBase::Natural)
}

/// Log-transforms every column (`log(10^-p)` for pH columns), then centers by
/// the column mean and divides by the population standard deviation.
pub fn fit_transform_with(data: &Dataset, ph_columns: &[&str], base: LogBase) -> Result<(Dataset, Scaler)> {
    let ph: BTreeSet<&str> = ph_columns.iter().copied().collect();
    for name in &ph {
        if !data.feature_names.iter().any(|f| f == name) {
            return Err(Error::Schema(format!("pH column `{name}` is not a feature column")));
        }
    }

    let n = data.len();
    let d = data.dims();
    let mut scaler = Scaler {
        log_base: base,
        columns: data
            .feature_names
            .iter()
            .map(|name| ScalerColumn {
                name: name.clone(),
                is_ph: ph.contains(name.as_str()),
                mean: 0.0,
                std: 1.0,
                log_applied: true,
            })
            .collect(),
    };

    let mut logged = Matrix::zeros(n, d);
    for i in 0..n {
        let src = data.features.row(i);
        for j in 0..d {
            logged.row_mut(i)[j] = scaler.log_step(j, src[j], i)?;
        }
    }

    let mut constant = Vec::new();
    for j in 0..d {
        let mean = (0..n).map(|i| logged.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|i| {
                let c = logged.get(i, j) - mean;
                c * c
            })
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        // a constant column can still leave rounding residue in the variance
        if !(std > 1e-12 * (1.0 + mean.abs())) {
            constant.push(scaler.columns[j].name.clone());
        }
        scaler.columns[j].mean = mean;
        scaler.columns[j].std = std;
    }
    if !constant.is_empty() {
        return Err(Error::ZeroVariance(constant));
    }

    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let row = out.row_mut(i);
        for j in 0..d {
            row[j] = standardize(&scaler.columns[j], logged.get(i, j));
        }
    }
    let ds = Dataset::new(out, data.feature_names.clone(), data.coords.clone())?;
    Ok((ds, scaler))
}

#[inline]
fn standardize(col: &ScalerColumn, logged: f64) -> f64 {
    (logged - col.mean) / col.std
}

/// Replays the fitted transform on one raw feature vector.
pub fn apply_scaler(v: &[f64], scaler: &Scaler) -> Result<Vec<f64>> {
    if v.len() != scaler.dims() {
        return Err(Error::DimensionMismatch { expected: scaler.dims(), actual: v.len() });
    }
    v.iter()
        .enumerate()
        .map(|(j, &x)| Ok(standardize(&scaler.columns[j], scaler.log_step(j, x, 0)?)))
        .collect()
}
