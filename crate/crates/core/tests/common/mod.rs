#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soilpq::pq::{self, Codebook, TrainParams};
use soilpq::preprocess::{self, Dataset};
use soilpq::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| r.random_range(-3.0..3.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Synthetic table pushed through clean + standardization.
pub fn standardized_synthetic(n: usize, d: usize, g: usize, seed: u64) -> Dataset {
    let s = preprocess::gen_synthetic(n, d, g, seed).unwrap();
    let (clean, _) = preprocess::clean(&s.table).unwrap();
    preprocess::fit_transform(&clean, &[]).unwrap().0
}

pub fn trained(ds: &Dataset, m: usize, k: usize, seed: u64) -> Codebook {
    pq::train(ds, &TrainParams::new(m, k, seed)).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) || a == b
}

/// Plain double loop: Σ_i (a_i − b_i)², independent of the library kernels.
pub fn naive_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).powi(2);
    }
    s
}

/// Decode by indexing centroids directly.
pub fn naive_decode(code: &[u16], cb: &Codebook) -> Vec<f64> {
    let mut v = Vec::new();
    for (j, &c) in code.iter().enumerate() {
        for t in 0..cb.sub_dim() {
            v.push(cb.raw_centroids()[(j * cb.centroids_per_subspace() + c as usize) * cb.sub_dim() + t]);
        }
    }
    v
}

/// Global minimum SSE over every labelling of `points` into at most `k` groups.
pub fn brute_force_sse(points: &Matrix, k: usize) -> f64 {
    let n = points.rows();
    let d = points.cols();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for t in 0..d {
                sums[labels[i] * d + t] += points.get(i, t);
            }
        }
        let mut sse = 0.0;
        for i in 0..n {
            let c = labels[i];
            for t in 0..d {
                let mean = sums[c * d + t] / counts[c] as f64;
                sse += (points.get(i, t) - mean).powi(2);
            }
        }
        best = best.min(sse);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}
