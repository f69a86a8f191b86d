//! Lookup-table distances between queries and PQ codes, exhaustive k-NN,
//! and the class-id inverted index.

mod index;
mod registry;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::squared_l2;
use crate::pq::{CodeMatrix, Codebook};

pub use index::{analog_lookup, build_inverted_index, InvertedIndex};
pub use registry::{Adc, DistanceStrategy, PreparedQuery, Sdc, StrategyRegistry};

const SCAN_CHUNK_ROWS: usize = 4096;

/// Squared distances from each query subvector to every centroid of its subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    m: usize,
    k: usize,
    /// `m × k`, subspace-major.
    table: Vec<f64>,
}

impl LookupTable {
    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn centroids_per_subspace(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, subspace: usize, centroid: usize) -> f64 {
        self.table[subspace * self.k + centroid]
    }

    pub fn row(&self, subspace: usize) -> &[f64] {
        &self.table[subspace * self.k..(subspace + 1) * self.k]
    }

    #[inline]
    fn squared_unchecked(&self, code: &[u16]) -> f64 {
        let mut acc = 0.0;
        for (j, &c) in code.iter().enumerate() {
            acc += self.table[j * self.k + c as usize];
        }
        acc
    }

    fn check_code(&self, code: &[u16]) -> Result<()> {
        if code.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, actual: code.len() });
        }
        if let Some((position, &e)) = code.iter().enumerate().find(|(_, &e)| e as usize >= self.k) {
            return Err(Error::CodeOutOfRange { position, entry: e as u64, centroids: self.k });
        }
        Ok(())
    }
}

/// Builds the ADC table for query `y` (already standardized).
pub fn build_lookup_table(y: &[f64], cb: &Codebook) -> Result<LookupTable> {
    if y.len() != cb.dim() {
        return Err(Error::DimensionMismatch { expected: cb.dim(), actual: y.len() });
    }
    let (m, k, w) = (cb.subspaces(), cb.centroids_per_subspace(), cb.sub_dim());
    let mut table = Vec::with_capacity(m * k);
    for j in 0..m {
        let sub = &y[j * w..(j + 1) * w];
        for c in 0..k {
            table.push(squared_l2(sub, cb.centroid(j, c)));
        }
    }
    Ok(LookupTable { m, k, table })
}

/// Asymmetric distance: `sqrt(Σ_j table[j][code_j])`, which is exactly
/// `‖y − decode(code)‖`.
pub fn adc_distance(code: &[u16], table: &LookupTable) -> Result<f64> {
    table.check_code(code)?;
    Ok(table.squared_unchecked(code).sqrt())
}

#[inline]
pub(crate) fn sdc_squared_unchecked(code_y: &[u16], code_x: &[u16], cb: &Codebook) -> f64 {
    let k = cb.centroids_per_subspace();
    let t = cb.sdc_tables();
    let mut acc = 0.0;
    for (j, (&a, &b)) in code_y.iter().zip(code_x).enumerate() {
        acc += t[(j * k + a as usize) * k + b as usize];
    }
    acc
}

/// Symmetric distance between two codes via cached inter-centroid tables.
pub fn sdc_distance(code_y: &[u16], code_x: &[u16], cb: &Codebook) -> Result<f64> {
    cb.check_code(code_y)?;
    cb.check_code(code_x)?;
    Ok(sdc_squared_unchecked(code_y, code_x, cb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub row_id: usize,
    pub distance: f64,
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.distance.total_cmp(&b.distance).then(a.row_id.cmp(&b.row_id))
}

/// Keeps the `n` best of `scored`, sorted by (distance, row_id).
fn select_top(mut scored: Vec<Neighbor>, n: usize) -> Vec<Neighbor> {
    if n < scored.len() {
        scored.select_nth_unstable_by(n, neighbor_order);
        scored.truncate(n);
    }
    scored.sort_unstable_by(neighbor_order);
    scored
}

/// Exhaustive scan with a prepared query; `n` closest rows by (distance, row_id).
pub fn knn_with(query: &dyn PreparedQuery, codes: &CodeMatrix, n: usize) -> Result<Vec<Neighbor>> {
    if n == 0 {
        return Err(Error::InvalidParams("k must be >= 1".into()));
    }
    if codes.is_empty() {
        return Err(Error::InvalidParams("no codes to search".into()));
    }
    let m = codes.subspaces();
    let partial: Vec<Vec<Neighbor>> = codes
        .as_slice()
        .par_chunks(SCAN_CHUNK_ROWS * m)
        .enumerate()
        .map(|(ci, block)| {
            let base = ci * SCAN_CHUNK_ROWS;
            let scored = block
                .chunks_exact(m)
                .enumerate()
                .map(|(i, code)| Neighbor { row_id: base + i, distance: query.distance(code) })
                .collect();
            select_top(scored, n)
        })
        .collect();
    Ok(select_top(partial.into_iter().flatten().collect(), n))
}

/// ADC k-nearest neighbors of standardized query `y`.
pub fn knn(y: &[f64], codes: &CodeMatrix, cb: &Codebook, n: usize) -> Result<Vec<Neighbor>> {
    codes.check_compatible(cb)?;
    let q = Adc.prepare(y, cb)?;
    knn_with(q.as_ref(), codes, n)
}
