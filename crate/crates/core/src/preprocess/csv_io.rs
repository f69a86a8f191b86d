use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{Dataset, RawTable};

/// Empty, `NA` and `NaN` (any case) denote a missing cell.
pub fn is_missing_token(tok: &str) -> bool {
    let t = tok.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), source }
}

/// Reads a header-first CSV. When the first two columns are `lon,lat` they
/// become coordinates; every other column is a feature.
pub fn read_raw_csv(path: impl AsRef<Path>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> =
        rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    let has_coords = headers.len() >= 2
        && headers[0].eq_ignore_ascii_case("lon")
        && headers[1].eq_ignore_ascii_case("lat");
    let skip = if has_coords { 2 } else { 0 };
    let feature_names: Vec<String> = headers[skip..].to_vec();
    if feature_names.is_empty() {
        return Err(Error::Schema(format!("{}: no feature columns in header", path.display())));
    }

    let mut coords = has_coords.then(Vec::new);
    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        // header is line 1
        let line = i + 2;
        let mut parsed = Vec::with_capacity(rec.len());
        for (j, tok) in rec.iter().enumerate() {
            let v = if is_missing_token(tok) {
                f64::NAN
            } else {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Schema(format!(
                        "{}: line {line}, column `{}`: cannot parse `{tok}` as a number",
                        path.display(),
                        headers[j]
                    ))
                })?
            };
            parsed.push(v);
        }
        if let Some(c) = coords.as_mut() {
            c.push([parsed[0], parsed[1]]);
        }
        cells.extend_from_slice(&parsed[skip..]);
    }
    RawTable::new(feature_names, coords, cells)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Reads an already-clean CSV (no missing cells allowed).
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_raw_csv(path)?;
    let d = raw.num_features();
    let n = raw.num_rows();
    if let Some(pos) = raw.cells.iter().position(|v| !v.is_finite()) {
        return Err(Error::Schema(format!(
            "{}: line {}, column `{}`: missing or non-finite value",
            path.display(),
            pos / d + 2,
            raw.feature_names[pos % d]
        )));
    }
    if let Some(c) = &raw.coords {
        if let Some(i) = c.iter().position(|[a, b]| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Schema(format!("{}: line {}: missing coordinate", path.display(), i + 2)));
        }
    }
    let features = Matrix::new(n, d, raw.cells)?;
    Dataset::new(features, raw.feature_names, raw.coords).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn write_table(
    path: &Path,
    names: &[String],
    coords: Option<&[[f64; 2]]>,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = Vec::new();
    if coords.is_some() {
        header.push("lon".to_string());
        header.push("lat".to_string());
    }
    header.extend(names.iter().cloned());
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, row) in rows.enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(row.len() + 2);
        if let Some(c) = coords {
            fields.push(c[i][0].to_string());
            fields.push(c[i][1].to_string());
        }
        fields.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
        writeln!(w, "{}", fields.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_dataset_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    write_table(
        path.as_ref(),
        &ds.feature_names,
        ds.coords.as_deref(),
        ds.features.iter_rows().map(|r| r.to_vec()),
    )
}

/// Writes a raw table; missing cells become empty fields.
pub fn write_raw_csv(path: impl AsRef<Path>, t: &RawTable) -> Result<()> {
    write_table(path.as_ref(), &t.feature_names, t.coords.as_deref(), (0..t.num_rows()).map(|i| t.row(i).to_vec()))
}
