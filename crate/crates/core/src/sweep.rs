//! (subspaces × centroids) grid search and error/time Pareto front.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pq::{self, num_classes, TrainParams, MAX_CENTROIDS};
use crate::preprocess::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub m: usize,
    pub k: usize,
    /// `k^m`; `None` when it overflows.
    pub num_classes: Option<u64>,
    pub train_seconds: f64,
    pub encode_seconds: f64,
    pub mse: f64,
    pub rmse: f64,
    pub seed: u64,
    pub status: CellStatus,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    fn skipped(m: usize, k: usize, seed: u64, reason: String) -> Self {
        Self {
            m,
            k,
            num_classes: num_classes(m, k).ok(),
            train_seconds: 0.0,
            encode_seconds: 0.0,
            mse: f64::NAN,
            rmse: f64::NAN,
            seed,
            status: CellStatus::Skipped(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    /// Timed repetitions per cell; the median time is reported.
    pub repeats: usize,
    /// When false, times are reported as 0 and cells run concurrently.
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iters: crate::kmeans::DEFAULT_MAX_ITERS,
            tol: crate::kmeans::DEFAULT_TOL,
            repeats: 1,
            timing: true,
        }
    }
}

fn skip_reason(data: &Dataset, m: usize, k: usize) -> Option<String> {
    if m == 0 || k == 0 {
        return Some("subspaces and centroids must be >= 1".into());
    }
    if data.dims() % m != 0 {
        return Some(format!("D={} not divisible by M={m}", data.dims()));
    }
    if k > MAX_CENTROIDS {
        return Some(format!("K={k} exceeds {MAX_CENTROIDS}"));
    }
    if data.len() < k {
        return Some(format!("N={} < K={k}", data.len()));
    }
    if num_classes(m, k).is_err() {
        return Some(format!("{k}^{m} classes overflow"));
    }
    None
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn run_cell(data: &Dataset, m: usize, k: usize, opts: &SweepOptions) -> Result<SweepRecord> {
    if let Some(reason) = skip_reason(data, m, k) {
        return Ok(SweepRecord::skipped(m, k, opts.seed, reason));
    }
    let params = TrainParams { subspaces: m, centroids: k, seed: opts.seed, max_iters: opts.max_iters, tol: opts.tol };
    let reps = if opts.timing { opts.repeats.max(1) } else { 1 };
    let mut train_times = Vec::with_capacity(reps);
    let mut encode_times = Vec::with_capacity(reps);
    let mut result = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let cb = pq::train(data, &params)?;
        let t1 = Instant::now();
        let codes = pq::encode_dataset(data, &cb)?;
        let t2 = Instant::now();
        train_times.push((t1 - t0).as_secs_f64());
        encode_times.push((t2 - t1).as_secs_f64());
        if result.is_none() {
            result = Some(pq::reconstruction_error_from_codes(&data.features, &codes, &cb)?);
        }
    }
    let err = result.expect("at least one repetition");
    let (train_seconds, encode_seconds) =
        if opts.timing { (median(train_times), median(encode_times)) } else { (0.0, 0.0) };
    Ok(SweepRecord {
        m,
        k,
        num_classes: num_classes(m, k).ok(),
        train_seconds,
        encode_seconds,
        mse: err.mse,
        rmse: err.rmse,
        seed: opts.seed,
        status: CellStatus::Ok,
    })
}

/// One record per `(m, k)` in `m_list × k_list`, M-major. Invalid cells are
/// reported as skipped. With timing on, cells run one after another.
pub fn run_sweep(data: &Dataset, m_list: &[usize], k_list: &[usize], opts: &SweepOptions) -> Result<Vec<SweepRecord>> {
    if m_list.is_empty() || k_list.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let cells: Vec<(usize, usize)> = m_list.iter().flat_map(|&m| k_list.iter().map(move |&k| (m, k))).collect();
    if opts.timing {
        cells.iter().map(|&(m, k)| run_cell(data, m, k, opts)).collect()
    } else {
        cells.par_iter().map(|&(m, k)| run_cell(data, m, k, opts)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub record: SweepRecord,
    pub dominated: bool,
}

/// `a` dominates `b` under (mse, train_seconds) minimization.
pub fn dominates(a: &SweepRecord, b: &SweepRecord) -> bool {
    a.mse <= b.mse && a.train_seconds <= b.train_seconds && (a.mse < b.mse || a.train_seconds < b.train_seconds)
}

fn point_order(a: &SweepRecord, b: &SweepRecord) -> std::cmp::Ordering {
    a.mse
        .total_cmp(&b.mse)
        .then(a.train_seconds.total_cmp(&b.train_seconds))
        .then(a.m.cmp(&b.m))
        .then(a.k.cmp(&b.k))
        .then(a.seed.cmp(&b.seed))
        .then(a.encode_seconds.total_cmp(&b.encode_seconds))
}

/// Flags every completed record as dominated or not, sorted by mse ascending.
/// Skipped records are excluded.
pub fn pareto_front(records: &[SweepRecord]) -> Result<Vec<ParetoPoint>> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidParams("no completed sweep records".into()));
    }
    let mut sorted = ok.clone();
    sorted.sort_by(|a, b| point_order(a, b));
    // after sorting by (mse, time) a record is dominated iff an earlier record
    // has time < its own, or equal time with strictly smaller mse
    let mut best_time = f64::INFINITY;
    let mut best_time_mse = f64::INFINITY;
    let mut out = Vec::with_capacity(sorted.len());
    for r in sorted {
        let dominated = r.train_seconds > best_time || (r.train_seconds == best_time && best_time_mse < r.mse);
        if r.train_seconds < best_time {
            best_time = r.train_seconds;
            best_time_mse = r.mse;
        }
        out.push(ParetoPoint { record: r.clone(), dominated });
    }
    Ok(out)
}

pub const SWEEP_HEADER: &str = "M,K,num_classes,train_seconds,encode_seconds,mse,rmse,seed,status,reason";

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn record_fields(r: &SweepRecord) -> String {
    let (status, reason) = match &r.status {
        CellStatus::Ok => ("ok", String::new()),
        CellStatus::Skipped(why) => ("skipped", why.clone()),
    };
    let ok = r.is_ok();
    let time = |t: f64| if ok { fmt_num(t) } else { String::new() };
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{},{},{},{},{},{},{},{},{}",
        r.m,
        r.k,
        r.num_classes.map(|c| c.to_string()).unwrap_or_default(),
        time(r.train_seconds),
        time(r.encode_seconds),
        fmt_num(r.mse),
        fmt_num(r.rmse),
        r.seed,
        status,
        csv_escape(&reason)
    );
    s
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_to_csv(records: &[SweepRecord]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&record_fields(r));
        s.push('\n');
    }
    s
}

/// Pareto CSV: the sweep columns plus `dominated`.
pub fn pareto_to_csv(points: &[ParetoPoint]) -> String {
    let mut s = format!("{SWEEP_HEADER},dominated\n");
    for p in points {
        let _ = writeln!(s, "{},{}", record_fields(&p.record), p.dominated);
    }
    s
}

pub fn write_sweep_csv(path: impl AsRef<Path>, records: &[SweepRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, sweep_to_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn write_pareto_csv(path: impl AsRef<Path>, points: &[ParetoPoint]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pareto_to_csv(points)).map_err(|e| Error::io(path, e))
}

/// Reads a sweep CSV as written by [`write_sweep_csv`].
pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::Csv { path: path.into(), source: e })?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))
    };
    let idx = [
        col("M")?,
        col("K")?,
        col("num_classes")?,
        col("train_seconds")?,
        col("encode_seconds")?,
        col("mse")?,
        col("rmse")?,
        col("seed")?,
        col("status")?,
        col("reason")?,
    ];
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let line = i + 2;
        let field = |j: usize| rec.get(idx[j]).unwrap_or("").trim();
        let bad = |what: &str, v: &str| {
            Error::Schema(format!("{}: line {line}, column `{what}`: invalid value `{v}`", path.display()))
        };
        let int = |j: usize, what: &str| field(j).parse::<u64>().map_err(|_| bad(what, field(j)));
        let real = |j: usize, what: &str| {
            let v = field(j);
            if v.is_empty() {
                Ok(f64::NAN)
            } else {
                v.parse::<f64>().map_err(|_| bad(what, v))
            }
        };
        let status = match field(8) {
            "ok" => CellStatus::Ok,
            "skipped" => CellStatus::Skipped(field(9).to_string()),
            other => return Err(bad("status", other)),
        };
        let ok = status == CellStatus::Ok;
        let num_classes = if field(2).is_empty() { None } else { Some(int(2, "num_classes")?) };
        let r = SweepRecord {
            m: int(0, "M")? as usize,
            k: int(1, "K")? as usize,
            num_classes,
            train_seconds: if ok { real(3, "train_seconds")? } else { 0.0 },
            encode_seconds: if ok { real(4, "encode_seconds")? } else { 0.0 },
            mse: real(5, "mse")?,
            rmse: real(6, "rmse")?,
            seed: int(7, "seed")?,
            status,
        };
        if r.is_ok() && (r.mse.is_nan() || r.train_seconds.is_nan()) {
            return Err(bad("mse", field(5)));
        }
        out.push(r);
    }
    Ok(out)
}
