//! `soilpq` command-line entry point.
//!
//! Exit codes: 0 success, 1 data/runtime error, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::kmeans::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::persistence;
use crate::pq::{self, class_id, decode, encode, TrainParams};
use crate::preprocess::{self, apply_scaler};
use crate::search::{build_inverted_index, knn_with, StrategyRegistry};
use crate::sweep::{self, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "soilpq", version, about = "Product quantization for tabular similarity classification")]
pub struct Cli {
    /// Worker threads; 0 uses every available core. Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian-mixture table with lon/lat columns.
    GenSynthetic(GenArgs),
    /// Clean a raw table and standardize it (log, center, scale).
    Preprocess(PreprocessArgs),
    /// Train a product-quantization codebook on a standardized table.
    Train(TrainArgs),
    /// Encode a standardized table into a binary codes file.
    Encode(EncodeArgs),
    /// Print the round-trip error of a codes file against its source table.
    Reconstruct(ReconstructArgs),
    /// Nearest neighbors (and optionally same-class analogs) of a query.
    Query(QueryArgs),
    /// Write per-row class ids with coordinates.
    Classify(ClassifyArgs),
    /// Grid search over subspace and centroid counts.
    Sweep(SweepArgs),
    /// Flag the error/time Pareto front of a sweep CSV.
    Pareto(ParetoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of rows.
    #[arg(long)]
    pub rows: usize,
    /// Number of feature columns.
    #[arg(long, default_value_t = 48)]
    pub dims: usize,
    /// Number of Gaussian clusters.
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of ground-truth cluster labels (`row_id,cluster`).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw CSV (`lon,lat,<features...>`).
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated pH column names (may be empty).
    #[arg(long, default_value = "")]
    pub ph_cols: String,
    /// Output CSV of standardized features.
    #[arg(long)]
    pub out: PathBuf,
    /// Output JSON with the fitted per-column transform.
    #[arg(long)]
    pub scaler_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Standardized CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of subspaces M (must divide the feature count).
    #[arg(long)]
    pub subspaces: usize,
    /// Centroids per subspace K.
    #[arg(long)]
    pub centroids: usize,
    /// Random seed; subspace j uses seed + j.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lloyd iteration cap per subspace.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Relative SSE improvement below which k-means stops.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Scaler JSON to embed so queries can be given in raw units.
    #[arg(long)]
    pub scaler: Option<PathBuf>,
    /// Output codebook JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Standardized CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Codebook JSON.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Output binary codes file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Standardized CSV the codes were built from.
    #[arg(long)]
    pub input: PathBuf,
    /// Codebook JSON.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Binary codes file.
    #[arg(long)]
    pub codes: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Codebook JSON.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Binary codes file to search.
    #[arg(long)]
    pub codes: PathBuf,
    /// Query vector as a comma list. Interpreted in raw units when the codebook
    /// embeds a scaler, unless --standardized is given.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "row", required_unless_present = "row")]
    pub vector: Option<String>,
    /// Use database row <ID> as the query: its row in --input when given,
    /// otherwise the reconstruction of its code.
    #[arg(long, value_name = "ID")]
    pub row: Option<usize>,
    /// Standardized CSV holding the rows for --row.
    #[arg(long, requires = "row")]
    pub input: Option<PathBuf>,
    /// Treat --vector as already standardized.
    #[arg(long)]
    pub standardized: bool,
    /// Number of neighbors.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Distance mode (registered: adc, sdc).
    #[arg(long, default_value = "adc")]
    pub mode: String,
    /// Print the query's class id and every row sharing it instead of neighbors.
    #[arg(long)]
    pub analogs: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Binary codes file.
    #[arg(long)]
    pub codes: PathBuf,
    /// Codebook JSON.
    #[arg(long)]
    pub codebook: PathBuf,
    /// CSV whose `lon,lat` columns give each row's coordinates.
    #[arg(long)]
    pub coords: PathBuf,
    /// Output CSV (`row_id,lon,lat,class_id`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Standardized CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated subspace counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub subspaces: Vec<usize>,
    /// Comma-separated centroid counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub centroids: Vec<usize>,
    /// Random seed shared by every cell.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lloyd iteration cap per subspace.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Relative SSE improvement below which k-means stops.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Timed repetitions per cell; the median is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Skip timing (times written as 0) and run cells in parallel.
    #[arg(long)]
    pub no_timing: bool,
    /// Output sweep CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Sweep CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output CSV with a `dominated` column.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

fn dispatch(cmd: Command) -> std::result::Result<(), CliError> {
    match cmd {
        Command::GenSynthetic(a) => gen_synthetic(a)?,
        Command::Preprocess(a) => preprocess_cmd(a)?,
        Command::Train(a) => train(a)?,
        Command::Encode(a) => encode_cmd(a)?,
        Command::Reconstruct(a) => reconstruct(a)?,
        Command::Query(a) => query(a)?,
        Command::Classify(a) => classify(a)?,
        Command::Sweep(a) => sweep_cmd(a)?,
        Command::Pareto(a) => pareto(a)?,
    }
    Ok(())
}

fn gen_synthetic(a: GenArgs) -> Result<()> {
    let s = preprocess::gen_synthetic(a.rows, a.dims, a.clusters, a.seed)?;
    preprocess::write_raw_csv(&a.out, &s.table)?;
    if let Some(p) = a.labels_out {
        let mut text = String::from("row_id,cluster\n");
        for (i, l) in s.labels.iter().enumerate() {
            text.push_str(&format!("{i},{l}\n"));
        }
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

fn preprocess_cmd(a: PreprocessArgs) -> Result<()> {
    let raw = preprocess::read_raw_csv(&a.input)?;
    let ph: Vec<&str> = a.ph_cols.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let (clean, summary) = preprocess::clean(&raw).map_err(|e| in_file(&a.input, e))?;
    eprintln!("{}: kept {} of {} rows; {summary}", a.input.display(), clean.len(), raw.num_rows());
    let (ds, scaler) = preprocess::fit_transform(&clean, &ph).map_err(|e| in_file(&a.input, e))?;
    preprocess::write_dataset_csv(&a.out, &ds)?;
    persistence::save_scaler(&scaler, &a.scaler_out)
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { .. } | Error::Csv { .. } | Error::CorruptFile { .. } => e,
        other => Error::Schema(format!("{}: {other}", path.display())),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = preprocess::read_dataset_csv(&a.input)?;
    let params =
        TrainParams { subspaces: a.subspaces, centroids: a.centroids, seed: a.seed, max_iters: a.max_iters, tol: a.tol };
    let mut cb = pq::train(&ds, &params).map_err(|e| in_file(&a.input, e))?;
    if let Some(p) = &a.scaler {
        let s = persistence::load_scaler(p)?;
        if s.columns.iter().map(|c| &c.name).ne(ds.feature_names.iter()) {
            return Err(Error::Schema(format!(
                "{}: scaler columns do not match the feature columns of {}",
                p.display(),
                a.input.display()
            )));
        }
        cb.set_scaler(Some(s))?;
    }
    persistence::save_codebook(&cb, &a.out)
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let cb = persistence::load_codebook(&a.codebook)?;
    let ds = preprocess::read_dataset_csv(&a.input)?;
    let codes = pq::encode_dataset(&ds, &cb).map_err(|e| in_file(&a.input, e))?;
    persistence::save_codes(&codes, &a.out)
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let cb = persistence::load_codebook(&a.codebook)?;
    let codes = persistence::load_codes(&a.codes)?;
    let ds = preprocess::read_dataset_csv(&a.input)?;
    let err = pq::reconstruction_error_from_codes(&ds.features, &codes, &cb).map_err(|e| in_file(&a.codes, e))?;
    println!("mse={} rmse={}", err.mse, err.rmse);
    Ok(())
}

fn parse_vector(text: &str) -> std::result::Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--vector: cannot parse `{}` as a number", t.trim())))
        })
        .collect()
}

fn query(a: QueryArgs) -> std::result::Result<(), CliError> {
    let registry = StrategyRegistry::default();
    let strategy = registry.get(&a.mode).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let cb = persistence::load_codebook(&a.codebook)?;
    let codes = persistence::load_codes(&a.codes)?;
    codes.check_compatible(&cb).map_err(|e| in_file(&a.codes, e))?;

    let y = match (&a.vector, a.row) {
        (Some(text), _) => {
            let v = parse_vector(text)?;
            match cb.scaler() {
                Some(s) if !a.standardized => apply_scaler(&v, s)?,
                _ => v,
            }
        }
        (None, Some(row)) => {
            if row >= codes.len() {
                return Err(Error::InvalidParams(format!("--row {row} out of range ({} rows)", codes.len())).into());
            }
            match &a.input {
                Some(p) => {
                    let ds = preprocess::read_dataset_csv(p)?;
                    if row >= ds.len() {
                        return Err(Error::InvalidParams(format!("--row {row} out of range for {}", p.display())).into());
                    }
                    ds.features.row(row).to_vec()
                }
                None => decode(codes.row(row), &cb)?,
            }
        }
        (None, None) => return Err(CliError::Usage("one of --vector or --row is required".into())),
    };
    if y.len() != cb.dim() {
        return Err(Error::DimensionMismatch { expected: cb.dim(), actual: y.len() }.into());
    }

    let mut out = String::new();
    if a.analogs {
        let idx = build_inverted_index(&codes, &cb)?;
        let code = encode(&y, &cb)?;
        let id = class_id(code.entries(), cb.centroids_per_subspace())?;
        out.push_str(&format!("class_id={id}\n"));
        for r in idx.get(id) {
            out.push_str(&format!("{r}\n"));
        }
    } else {
        let prepared = strategy.prepare(&y, &cb)?;
        for (rank, n) in knn_with(prepared.as_ref(), &codes, a.k)?.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", rank + 1, n.row_id, format_significant(n.distance, 9)));
        }
    }
    print!("{out}");
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let cb = persistence::load_codebook(&a.codebook)?;
    let codes = persistence::load_codes(&a.codes)?;
    let table = preprocess::read_raw_csv(&a.coords)?;
    let coords = table.coords.as_deref();
    if coords.is_none() {
        return Err(Error::Schema(format!("{}: {}", a.coords.display(), Error::MissingCoords)));
    }
    persistence::save_assignments(&codes, coords, &cb, &a.out).map_err(|e| in_file(&a.coords, e))
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let ds = preprocess::read_dataset_csv(&a.input)?;
    let opts = SweepOptions { seed: a.seed, max_iters: a.max_iters, tol: a.tol, repeats: a.repeats, timing: !a.no_timing };
    let records = sweep::run_sweep(&ds, &a.subspaces, &a.centroids, &opts)?;
    for r in records.iter().filter(|r| !r.is_ok()) {
        if let sweep::CellStatus::Skipped(why) = &r.status {
            log::warn!("skipped M={} K={}: {why}", r.m, r.k);
        }
    }
    sweep::write_sweep_csv(&a.out, &records)
}

fn pareto(a: ParetoArgs) -> Result<()> {
    let records = sweep::read_sweep_csv(&a.input)?;
    let front = sweep::pareto_front(&records).map_err(|e| in_file(&a.input, e))?;
    sweep::write_pareto_csv(&a.out, &front)
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
