//! Product quantizer: per-subspace k-means codebooks, encode/decode, and
//! code-to-class arithmetic.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans::{self, KMeansParams};
use crate::matrix::{squared_l2, Matrix};
use crate::preprocess::{Dataset, Scaler};

/// Largest supported centroid count (code entries are `u16`).
pub const MAX_CENTROIDS: usize = 1 << 16;

/// Trained codebooks for `m` contiguous subspaces of width `sub_dim`.
#[derive(Debug)]
pub struct Codebook {
    dim: usize,
    m: usize,
    k: usize,
    sub_dim: usize,
    /// `m × k × sub_dim`, subspace-major.
    centroids: Vec<f64>,
    subspace_sse: Vec<f64>,
    seed: u64,
    scaler: Option<Scaler>,
    /// `m × k × k` squared inter-centroid distances, built on first SDC use.
    sdc_tables: OnceLock<Vec<f64>>,
}

impl Clone for Codebook {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            m: self.m,
            k: self.k,
            sub_dim: self.sub_dim,
            centroids: self.centroids.clone(),
            subspace_sse: self.subspace_sse.clone(),
            seed: self.seed,
            scaler: self.scaler.clone(),
            sdc_tables: OnceLock::new(),
        }
    }
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.m == other.m
            && self.k == other.k
            && self.seed == other.seed
            && self.scaler == other.scaler
            && bits_eq(&self.centroids, &other.centroids)
            && bits_eq(&self.subspace_sse, &other.subspace_sse)
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Subspace counts that evenly divide `dim`.
pub fn valid_subspace_counts(dim: usize) -> Vec<usize> {
    (1..=dim).filter(|m| dim % m == 0).collect()
}

fn check_shape(dim: usize, m: usize, k: usize) -> Result<usize> {
    if m == 0 || dim == 0 {
        return Err(Error::InvalidParams(format!("dims and subspaces must be >= 1 (D={dim}, M={m})")));
    }
    if dim % m != 0 {
        return Err(Error::IndivisibleDims { dims: dim, subspaces: m, valid: valid_subspace_counts(dim) });
    }
    if k == 0 || k > MAX_CENTROIDS {
        return Err(Error::InvalidParams(format!("centroids per subspace must be in [1, {MAX_CENTROIDS}] (got {k})")));
    }
    Ok(dim / m)
}

impl Codebook {
    /// Assembles a codebook from raw parts; `centroids` is `m × k × (dim/m)`.
    pub fn from_parts(
        dim: usize,
        m: usize,
        k: usize,
        centroids: Vec<f64>,
        subspace_sse: Vec<f64>,
        seed: u64,
        scaler: Option<Scaler>,
    ) -> Result<Self> {
        let sub_dim = check_shape(dim, m, k)?;
        if centroids.len() != m * k * sub_dim {
            return Err(Error::DimensionMismatch { expected: m * k * sub_dim, actual: centroids.len() });
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("centroids must be finite".into()));
        }
        if subspace_sse.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: subspace_sse.len() });
        }
        if let Some(s) = &scaler {
            if s.dims() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: s.dims() });
            }
        }
        Ok(Self { dim, m, k, sub_dim, centroids, subspace_sse, seed, scaler, sdc_tables: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn centroids_per_subspace(&self) -> usize {
        self.k
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subspace_sse(&self) -> &[f64] {
        &self.subspace_sse
    }

    /// Sum of the per-subspace training SSEs.
    pub fn total_sse(&self) -> f64 {
        self.subspace_sse.iter().sum()
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn set_scaler(&mut self, scaler: Option<Scaler>) -> Result<()> {
        if let Some(s) = &scaler {
            if s.dims() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, actual: s.dims() });
            }
        }
        self.scaler = scaler;
        Ok(())
    }

    /// All centroid coordinates, `m × k × sub_dim`.
    pub fn raw_centroids(&self) -> &[f64] {
        &self.centroids
    }

    #[inline]
    pub fn centroid(&self, subspace: usize, index: usize) -> &[f64] {
        let start = (subspace * self.k + index) * self.sub_dim;
        &self.centroids[start..start + self.sub_dim]
    }

    pub fn num_classes(&self) -> Result<u64> {
        num_classes(self.m, self.k)
    }

    pub(crate) fn sdc_tables(&self) -> &[f64] {
        self.sdc_tables.get_or_init(|| {
            let (m, k) = (self.m, self.k);
            let mut t = vec![0.0; m * k * k];
            for j in 0..m {
                for a in 0..k {
                    for b in 0..k {
                        t[(j * k + a) * k + b] = squared_l2(self.centroid(j, a), self.centroid(j, b));
                    }
                }
            }
            t
        })
    }

    pub(crate) fn check_code(&self, code: &[u16]) -> Result<()> {
        if code.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, actual: code.len() });
        }
        if let Some((position, &e)) = code.iter().enumerate().find(|(_, &e)| e as usize >= self.k) {
            return Err(Error::CodeOutOfRange { position, entry: e as u64, centroids: self.k });
        }
        Ok(())
    }

    pub(crate) fn encode_unchecked(&self, v: &[f64], out: &mut [u16]) {
        for (j, slot) in out.iter_mut().enumerate() {
            let sub = &v[j * self.sub_dim..(j + 1) * self.sub_dim];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..self.k {
                let d = squared_l2(sub, self.centroid(j, c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            *slot = best as u16;
        }
    }
}

/// Per-subspace centroid indices for one vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PQCode(pub Vec<u16>);

impl PQCode {
    pub fn entries(&self) -> &[u16] {
        &self.0
    }
}

/// `N × M` codes; row `i` encodes dataset row `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    m: usize,
    k: usize,
    codes: Vec<u16>,
}

impl CodeMatrix {
    pub fn new(m: usize, k: usize, codes: Vec<u16>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("code width must be >= 1".into()));
        }
        if k == 0 || k > MAX_CENTROIDS {
            return Err(Error::InvalidParams(format!("centroid count {k} outside [1, {MAX_CENTROIDS}]")));
        }
        if codes.len() % m != 0 {
            return Err(Error::DimensionMismatch { expected: codes.len().div_ceil(m) * m, actual: codes.len() });
        }
        if let Some(pos) = codes.iter().position(|&e| e as usize >= k) {
            return Err(Error::CodeOutOfRange { position: pos, entry: codes[pos] as u64, centroids: k });
        }
        Ok(Self { m, k, codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn centroids_per_subspace(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u16] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u16]> + '_ {
        self.codes.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.codes
    }

    /// Ensures these codes were produced for `cb`'s shape.
    pub fn check_compatible(&self, cb: &Codebook) -> Result<()> {
        if self.m != cb.m {
            return Err(Error::DimensionMismatch { expected: cb.m, actual: self.m });
        }
        if self.k != cb.k {
            return Err(Error::InvalidParams(format!(
                "codes were built for K={} but the codebook has K={}",
                self.k, cb.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub subspaces: usize,
    pub centroids: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl TrainParams {
    pub fn new(subspaces: usize, centroids: usize, seed: u64) -> Self {
        Self { subspaces, centroids, seed, max_iters: kmeans::DEFAULT_MAX_ITERS, tol: kmeans::DEFAULT_TOL }
    }
}

/// Trains one k-means codebook per contiguous column block. Subspace `j`
/// uses seed `seed + j`.
pub fn train(data: &Dataset, params: &TrainParams) -> Result<Codebook> {
    let dim = data.dims();
    let (m, k) = (params.subspaces, params.centroids);
    let sub_dim = check_shape(dim, m, k)?;
    if data.len() < k {
        return Err(Error::TooFewPoints { points: data.len(), clusters: k });
    }
    warn_if_unstandardized(data);

    let models: Vec<kmeans::KMeansModel> = (0..m)
        .into_par_iter()
        .map(|j| {
            let block = data.features.column_block(j * sub_dim, sub_dim);
            let kp = KMeansParams::new(k, params.seed.wrapping_add(j as u64))
                .max_iters(params.max_iters)
                .tol(params.tol);
            kmeans::fit(&block, &kp)
        })
        .collect::<Result<_>>()?;

    let mut centroids = Vec::with_capacity(m * k * sub_dim);
    let mut sse = Vec::with_capacity(m);
    for model in models {
        centroids.extend_from_slice(model.centroids.as_slice());
        sse.push(model.final_sse);
    }
    Codebook::from_parts(dim, m, k, centroids, sse, params.seed, None)
}

fn warn_if_unstandardized(data: &Dataset) {
    let n = data.len() as f64;
    for j in 0..data.dims() {
        let mean = data.features.iter_rows().map(|r| r[j]).sum::<f64>() / n;
        let var = data.features.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        if (var.sqrt() - 1.0).abs() > 0.1 {
            log::warn!(
                "column `{}` has standard deviation {:.3}; training expects standardized data",
                data.feature_names[j],
                var.sqrt()
            );
        }
    }
}

/// Nearest codeword per subspace, ties to the lowest index.
pub fn encode(v: &[f64], cb: &Codebook) -> Result<PQCode> {
    if v.len() != cb.dim {
        return Err(Error::DimensionMismatch { expected: cb.dim, actual: v.len() });
    }
    let mut out = vec![0u16; cb.m];
    cb.encode_unchecked(v, &mut out);
    Ok(PQCode(out))
}

/// Row-parallel [`encode`] over a whole matrix.
pub fn encode_matrix(features: &Matrix, cb: &Codebook) -> Result<CodeMatrix> {
    if features.cols() != cb.dim {
        return Err(Error::DimensionMismatch { expected: cb.dim, actual: features.cols() });
    }
    let mut codes = vec![0u16; features.rows() * cb.m];
    codes
        .par_chunks_mut(cb.m)
        .zip(features.as_slice().par_chunks(cb.dim))
        .for_each(|(out, v)| cb.encode_unchecked(v, out));
    CodeMatrix::new(cb.m, cb.k, codes)
}

pub fn encode_dataset(data: &Dataset, cb: &Codebook) -> Result<CodeMatrix> {
    encode_matrix(&data.features, cb)
}

/// Concatenation of the selected centroids.
pub fn decode(code: &[u16], cb: &Codebook) -> Result<Vec<f64>> {
    cb.check_code(code)?;
    let mut out = Vec::with_capacity(cb.dim);
    for (j, &c) in code.iter().enumerate() {
        out.extend_from_slice(cb.centroid(j, c as usize));
    }
    Ok(out)
}

/// Mean and root-mean squared round-trip error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionError {
    pub mse: f64,
    pub rmse: f64,
}

/// `mse = (1/N) Σ ‖x − decode(encode(x))‖²`.
pub fn reconstruction_error(data: &Dataset, cb: &Codebook) -> Result<ReconstructionError> {
    let codes = encode_dataset(data, cb)?;
    reconstruction_error_from_codes(&data.features, &codes, cb)
}

/// Round-trip error of precomputed codes against their source rows.
pub fn reconstruction_error_from_codes(
    features: &Matrix,
    codes: &CodeMatrix,
    cb: &Codebook,
) -> Result<ReconstructionError> {
    if features.cols() != cb.dim {
        return Err(Error::DimensionMismatch { expected: cb.dim, actual: features.cols() });
    }
    if codes.len() != features.rows() {
        return Err(Error::DimensionMismatch { expected: features.rows(), actual: codes.len() });
    }
    codes.check_compatible(cb)?;
    if features.rows() == 0 {
        return Ok(ReconstructionError { mse: 0.0, rmse: 0.0 });
    }
    let chunk = kmeans::DEFAULT_CHUNK_ROWS;
    let partials: Vec<f64> = features
        .as_slice()
        .par_chunks(chunk * cb.dim)
        .zip(codes.as_slice().par_chunks(chunk * cb.m))
        .map(|(fs, cs)| {
            fs.chunks_exact(cb.dim)
                .zip(cs.chunks_exact(cb.m))
                .map(|(x, code)| {
                    code.iter()
                        .enumerate()
                        .map(|(j, &c)| {
                            squared_l2(&x[j * cb.sub_dim..(j + 1) * cb.sub_dim], cb.centroid(j, c as usize))
                        })
                        .sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    let mse = partials.iter().sum::<f64>() / features.rows() as f64;
    Ok(ReconstructionError { mse, rmse: mse.sqrt() })
}

/// Number of distinct codes, `k^m`, bounded by `i64::MAX`.
pub fn num_classes(m: usize, k: usize) -> Result<u64> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidParams(format!("subspaces and centroids must be >= 1 (M={m}, K={k})")));
    }
    let exp = u32::try_from(m).map_err(|_| Error::Overflow { subspaces: m, centroids: k })?;
    (k as u64)
        .checked_pow(exp)
        .filter(|&v| v <= i64::MAX as u64)
        .ok_or(Error::Overflow { subspaces: m, centroids: k })
}

/// Big-endian mixed-radix class id: `Σ code_j · k^(m−1−j)`.
pub fn class_id(code: &[u16], k: usize) -> Result<u64> {
    num_classes(code.len(), k)?;
    let mut id = 0u64;
    for (position, &e) in code.iter().enumerate() {
        if e as usize >= k {
            return Err(Error::CodeOutOfRange { position, entry: e as u64, centroids: k });
        }
        id = id * k as u64 + e as u64;
    }
    Ok(id)
}

/// Inverse of [`class_id`].
pub fn code_from_class_id(id: u64, m: usize, k: usize) -> Result<PQCode> {
    let total = num_classes(m, k)?;
    if id >= total {
        return Err(Error::CodeOutOfRange { position: 0, entry: id, centroids: k });
    }
    let mut code = vec![0u16; m];
    let mut rest = id;
    for slot in code.iter_mut().rev() {
        *slot = (rest % k as u64) as u16;
        rest /= k as u64;
    }
    Ok(PQCode(code))
}
