//! Seeded Lloyd k-means with greedy k-means++ initialization and restarts.
//!
//! Row-parallel steps work on fixed-size chunks whose partial results are
//! combined in ascending chunk order, so output is bitwise independent of the
//! rayon thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{squared_l2, Matrix};

/// Rows per parallel work unit.
pub const DEFAULT_CHUNK_ROWS: usize = 4096;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_N_INIT: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative SSE improvement of an iteration falls below this.
    pub tol: f64,
    pub chunk_rows: usize,
    /// Independent k-means++ starts; the lowest final SSE wins, earliest on ties.
    pub n_init: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_TOL, chunk_rows: DEFAULT_CHUNK_ROWS, n_init: DEFAULT_N_INIT }
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

/// Cluster label per point, each in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Matrix,
    pub k: usize,
    pub d: usize,
    pub final_sse: f64,
    pub iterations_run: usize,
    pub seed: u64,
    /// SSE after initialization and after every Lloyd iteration.
    pub sse_history: Vec<f64>,
    /// Labels of the training points under `centroids`.
    pub assignment: Assignment,
}

fn check_finite(points: &Matrix) -> Result<()> {
    for (i, r) in points.iter_rows().enumerate() {
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, column: j });
        }
    }
    Ok(())
}

/// Index of the nearest centroid and its squared distance; ties go to the lower index.
#[inline]
pub(crate) fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = squared_l2(point, row);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn assign_chunked(points: &Matrix, centroids: &Matrix, chunk_rows: usize) -> (Vec<usize>, Vec<f64>) {
    let d = points.cols();
    let chunk = chunk_rows.max(1) * d.max(1);
    let parts: Vec<(Vec<usize>, Vec<f64>)> = points
        .as_slice()
        .par_chunks(chunk)
        .map(|block| block.chunks_exact(d).map(|p| nearest(p, centroids)).unzip())
        .collect();
    let mut labels = Vec::with_capacity(points.rows());
    let mut dists = Vec::with_capacity(points.rows());
    for (l, ds) in parts {
        labels.extend(l);
        dists.extend(ds);
    }
    (labels, dists)
}

/// Sum of per-point squared distances in fixed-size chunks, chunks added in order.
fn chunked_sum(values: &[f64], chunk_rows: usize) -> f64 {
    let partials: Vec<f64> = values.par_chunks(chunk_rows.max(1)).map(|c| c.iter().sum::<f64>()).collect();
    partials.iter().sum()
}

/// Nearest-centroid label for every point.
pub fn assign(points: &Matrix, centroids: &Matrix) -> Result<Assignment> {
    if points.cols() != centroids.cols() {
        return Err(Error::DimensionMismatch { expected: centroids.cols(), actual: points.cols() });
    }
    if centroids.rows() == 0 {
        return Err(Error::InvalidParams("no centroids".into()));
    }
    Ok(Assignment { labels: assign_chunked(points, centroids, DEFAULT_CHUNK_ROWS).0 })
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn sse(points: &Matrix, centroids: &Matrix, assignment: &Assignment) -> Result<f64> {
    if points.cols() != centroids.cols() {
        return Err(Error::DimensionMismatch { expected: centroids.cols(), actual: points.cols() });
    }
    if assignment.labels.len() != points.rows() {
        return Err(Error::DimensionMismatch { expected: points.rows(), actual: assignment.labels.len() });
    }
    if let Some(&bad) = assignment.labels.iter().find(|&&l| l >= centroids.rows()) {
        return Err(Error::InvalidParams(format!("label {bad} >= k = {}", centroids.rows())));
    }
    let dists: Vec<f64> = points
        .iter_rows()
        .zip(&assignment.labels)
        .map(|(p, &l)| squared_l2(p, centroids.row(l)))
        .collect();
    Ok(chunked_sum(&dists, DEFAULT_CHUNK_ROWS))
}

/// Draws one row with probability proportional to `weights`; uniform when all
/// weights are zero.
fn sample_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..n);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && acc > target {
            return i;
        }
    }
    // rounding can leave target just above the final running sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1)
}

/// Greedy k-means++: each step draws `2 + ln k` D²-weighted candidates and
/// keeps the one yielding the lowest potential (first wins on ties).
fn kmeans_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut closest: Vec<f64> = points.iter_rows().map(|p| squared_l2(p, points.row(first))).collect();

    for c in 1..k {
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = sample_weighted(&closest, rng);
            let merged: Vec<f64> = points
                .iter_rows()
                .zip(&closest)
                .map(|(p, &old)| old.min(squared_l2(p, points.row(cand))))
                .collect();
            let potential = chunked_sum(&merged, DEFAULT_CHUNK_ROWS);
            if best.as_ref().is_none_or(|(b, _, _)| potential < *b) {
                best = Some((potential, cand, merged));
            }
        }
        let (_, pick, merged) = best.expect("at least two trials");
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        closest = merged;
    }
    centroids
}

/// Recomputes centroids as cluster means. Empty clusters take the point
/// farthest from its (updated) centroid, ties to the lowest row index, each
/// point used at most once per repair.
fn update(points: &Matrix, labels: &[usize], k: usize, chunk_rows: usize) -> Matrix {
    let d = points.cols();
    let parts: Vec<(Vec<f64>, Vec<usize>)> = points
        .as_slice()
        .par_chunks(chunk_rows.max(1) * d)
        .zip(labels.par_chunks(chunk_rows.max(1)))
        .map(|(block, ls)| {
            let mut sums = vec![0.0; k * d];
            let mut counts = vec![0usize; k];
            for (p, &l) in block.chunks_exact(d).zip(ls) {
                counts[l] += 1;
                for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
                    *s += v;
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (s, c) in parts {
        for (a, b) in sums.iter_mut().zip(&s) {
            *a += b;
        }
        for (a, b) in counts.iter_mut().zip(&c) {
            *a += b;
        }
    }

    let mut centroids = Matrix::zeros(k, d);
    for c in 0..k {
        if counts[c] > 0 {
            let inv = counts[c] as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                *dst = s / inv;
            }
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let dists: Vec<f64> =
            points.iter_rows().zip(labels).map(|(p, &l)| squared_l2(p, centroids.row(l))).collect();
        let mut order: Vec<usize> = (0..points.rows()).collect();
        // farthest first, ties by lowest row
        order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        for (c, &row) in empty.iter().zip(&order) {
            centroids.row_mut(*c).copy_from_slice(points.row(row));
        }
    }
    centroids
}

/// Fits `params.k` clusters by Lloyd iterations from the best of
/// `params.n_init` k-means++ starts.
///
/// Each iteration recomputes centroids and reassigns every point. Iteration
/// stops when `(sse_prev - sse) / max(sse_prev, eps) < tol` or after
/// `max_iters` iterations. The returned assignment is the nearest-centroid
/// labelling under the returned centroids.
pub fn fit(points: &Matrix, params: &KMeansParams) -> Result<KMeansModel> {
    let n = points.rows();
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints { points: n, clusters: k });
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidParams(format!("tol must be >= 0 (got {})", params.tol)));
    }
    if params.n_init == 0 {
        return Err(Error::InvalidParams("n_init must be at least 1".into()));
    }
    check_finite(points)?;

    // one stream across starts keeps every start distinct yet reproducible
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<KMeansModel> = None;
    for _ in 0..params.n_init {
        let model = lloyd(points, params, &mut rng);
        if best.as_ref().is_none_or(|b| model.final_sse < b.final_sse) {
            best = Some(model);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn lloyd(points: &Matrix, params: &KMeansParams, rng: &mut ChaCha8Rng) -> KMeansModel {
    let k = params.k;
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let (mut labels, dists) = assign_chunked(points, &centroids, params.chunk_rows);
    let mut current = chunked_sum(&dists, params.chunk_rows);
    let mut history = vec![current];
    let mut iterations = 0;

    while iterations < params.max_iters && current > 0.0 {
        let next_centroids = update(points, &labels, k, params.chunk_rows);
        let (next_labels, dists) = assign_chunked(points, &next_centroids, params.chunk_rows);
        let next = chunked_sum(&dists, params.chunk_rows);
        iterations += 1;
        history.push(next);
        let improvement = (current - next) / current.max(f64::MIN_POSITIVE);
        centroids = next_centroids;
        labels = next_labels;
        current = next;
        if improvement < params.tol {
            break;
        }
    }

    KMeansModel {
        centroids,
        k,
        d: points.cols(),
        final_sse: current,
        iterations_run: iterations,
        seed: params.seed,
        sse_history: history,
        assignment: Assignment { labels },
    }
}
