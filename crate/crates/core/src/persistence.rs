//! On-disk formats: JSON codebooks and scalers, binary code matrices, and
//! per-row class assignment CSVs.
//!
//! Codes file layout (all integers little-endian):
//!
//! ```text
//! offset 0  : b"PQC1"
//! offset 4  : u32 N (rows)
//! offset 8  : u16 M (subspaces)
//! offset 10 : u16 K (centroids per subspace; 0 encodes 65536)
//! offset 12 : N·M u16 code entries, row-major
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pq::{class_id, CodeMatrix, Codebook, MAX_CENTROIDS};
use crate::preprocess::Scaler;

pub const CODEBOOK_FORMAT_VERSION: u64 = 1;
pub const CODES_MAGIC: &[u8; 4] = b"PQC1";
pub const CODES_HEADER_LEN: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
struct CodebookFile {
    format_version: u64,
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    sub_dim: usize,
    seed: u64,
    sse: Vec<f64>,
    /// `M × K × sub_dim`
    centroids: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<Scaler>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
}

pub fn codebook_to_json(cb: &Codebook) -> String {
    let (m, k, w) = (cb.subspaces(), cb.centroids_per_subspace(), cb.sub_dim());
    let centroids = (0..m).map(|j| (0..k).map(|c| cb.centroid(j, c).to_vec()).collect()).collect();
    let file = CodebookFile {
        format_version: CODEBOOK_FORMAT_VERSION,
        dim: cb.dim(),
        m,
        k,
        sub_dim: w,
        seed: cb.seed(),
        sse: cb.subspace_sse().to_vec(),
        centroids,
        scaler: cb.scaler().cloned(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("codebook serializes");
    s.push('\n');
    s
}

pub fn codebook_from_json(text: &str) -> Result<Codebook> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid JSON: {e}")))?;
    match value.get("format_version") {
        None => return Err(Error::Schema("format_version: missing field".into())),
        Some(v) => match v.as_u64() {
            Some(CODEBOOK_FORMAT_VERSION) => {}
            Some(found) => return Err(Error::FormatVersionMismatch { found, expected: CODEBOOK_FORMAT_VERSION }),
            None => return Err(Error::Schema(format!("format_version: expected an integer, got {v}"))),
        },
    }
    let file: CodebookFile = serde_path_to_error::deserialize(value)
        .map_err(|e| Error::Schema(format!("{}: {}", e.path(), e.inner())))?;

    if file.m == 0 || file.dim % file.m != 0 || file.sub_dim != file.dim / file.m {
        return Err(Error::Schema(format!(
            "sub_dim: {} inconsistent with D={} and M={}",
            file.sub_dim, file.dim, file.m
        )));
    }
    if file.centroids.len() != file.m {
        return Err(Error::Schema(format!("centroids: expected {} subspaces, found {}", file.m, file.centroids.len())));
    }
    let mut flat = Vec::with_capacity(file.m * file.k * file.sub_dim);
    for (j, sub) in file.centroids.iter().enumerate() {
        if sub.len() != file.k {
            return Err(Error::Schema(format!("centroids[{j}]: expected {} centroids, found {}", file.k, sub.len())));
        }
        for (c, v) in sub.iter().enumerate() {
            if v.len() != file.sub_dim {
                return Err(Error::Schema(format!(
                    "centroids[{j}][{c}]: expected {} values, found {}",
                    file.sub_dim,
                    v.len()
                )));
            }
            flat.extend_from_slice(v);
        }
    }
    if file.sse.len() != file.m {
        return Err(Error::Schema(format!("sse: expected {} values, found {}", file.m, file.sse.len())));
    }
    Codebook::from_parts(file.dim, file.m, file.k, flat, file.sse, file.seed, file.scaler)
        .map_err(|e| Error::Schema(e.to_string()))
}

pub fn save_codebook(cb: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), codebook_to_json(cb).as_bytes())
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Schema(format!("{}: not valid UTF-8", path.display())))?;
    codebook_from_json(text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_scaler(s: &Scaler, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(s).expect("scaler serializes");
    text.push('\n');
    write_file(path.as_ref(), text.as_bytes())
}

pub fn load_scaler(path: impl AsRef<Path>) -> Result<Scaler> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    let s: Scaler = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Schema(format!("{}: {}: {}", path.display(), e.path(), e.inner())))?;
    if let Some(c) = s.columns.iter().find(|c| !(c.std > 0.0) || !c.mean.is_finite()) {
        return Err(Error::Schema(format!("{}: column `{}` has invalid mean/std", path.display(), c.name)));
    }
    Ok(s)
}

pub fn codes_to_bytes(codes: &CodeMatrix) -> Result<Vec<u8>> {
    let n = u32::try_from(codes.len())
        .map_err(|_| Error::InvalidParams(format!("{} rows exceed the codes file limit", codes.len())))?;
    let m = u16::try_from(codes.subspaces())
        .map_err(|_| Error::InvalidParams(format!("M={} exceeds the codes file limit", codes.subspaces())))?;
    let k = codes.centroids_per_subspace();
    let k_field = if k == MAX_CENTROIDS { 0 } else { k as u16 };
    let mut out = Vec::with_capacity(CODES_HEADER_LEN + 2 * codes.as_slice().len());
    out.extend_from_slice(CODES_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&k_field.to_le_bytes());
    for &c in codes.as_slice() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    Ok(out)
}

/// Parses a codes file; `path` is only used in error messages.
pub fn codes_from_bytes(bytes: &[u8], path: &Path) -> Result<CodeMatrix> {
    let corrupt = |reason: String| Error::CorruptFile { path: path.to_path_buf(), reason };
    if bytes.len() < CODES_HEADER_LEN {
        return Err(corrupt(format!("{} bytes is shorter than the {CODES_HEADER_LEN}-byte header", bytes.len())));
    }
    if &bytes[..4] != CODES_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as u64;
    let m = u16::from_le_bytes(bytes[8..10].try_into().expect("2 bytes")) as u64;
    let k = match u16::from_le_bytes(bytes[10..12].try_into().expect("2 bytes")) {
        0 => MAX_CENTROIDS,
        k => k as usize,
    };
    if m == 0 {
        return Err(corrupt("M = 0".into()));
    }
    let expected = CODES_HEADER_LEN as u64 + 2 * n * m;
    if bytes.len() as u64 != expected {
        return Err(corrupt(format!("expected {expected} bytes for N={n}, M={m}, found {}", bytes.len())));
    }
    let codes: Vec<u16> =
        bytes[CODES_HEADER_LEN..].chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
    if let Some(pos) = codes.iter().position(|&c| c as usize >= k) {
        return Err(Error::CodeOutOfRange { position: pos, entry: codes[pos] as u64, centroids: k });
    }
    CodeMatrix::new(m as usize, k, codes)
}

pub fn save_codes(codes: &CodeMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &codes_to_bytes(codes)?)
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<CodeMatrix> {
    let path = path.as_ref();
    codes_from_bytes(&read_file(path)?, path)
}

/// CSV `row_id,lon,lat,class_id`, one line per code row.
pub fn assignments_to_csv(codes: &CodeMatrix, coords: Option<&[[f64; 2]]>, cb: &Codebook) -> Result<String> {
    let coords = coords.ok_or(Error::MissingCoords)?;
    if coords.len() != codes.len() {
        return Err(Error::DimensionMismatch { expected: codes.len(), actual: coords.len() });
    }
    codes.check_compatible(cb)?;
    let k = cb.centroids_per_subspace();
    let mut s = String::from("row_id,lon,lat,class_id\n");
    for (i, (code, [lon, lat])) in codes.iter_rows().zip(coords).enumerate() {
        s.push_str(&format!("{i},{lon},{lat},{}\n", class_id(code, k)?));
    }
    Ok(s)
}

pub fn save_assignments(
    codes: &CodeMatrix,
    coords: Option<&[[f64; 2]]>,
    cb: &Codebook,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_file(path.as_ref(), assignments_to_csv(codes, coords, cb)?.as_bytes())
}

/// Reads `row_id,lon,lat,class_id` back as `(row_id, class_id)` pairs.
pub fn load_assignments(path: impl AsRef<Path>) -> Result<Vec<(usize, u64)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let parse = |j: usize| -> Result<u64> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Schema(format!("{}: line {}: bad field {j}", path.display(), i + 2)))
        };
        out.push((parse(0)? as usize, parse(3)?));
    }
    Ok(out)
}
