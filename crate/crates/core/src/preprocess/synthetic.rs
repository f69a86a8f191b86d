use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::RawTable;

/// Half-width of the cube cluster centers are drawn from.
const CENTER_SPREAD: f64 = 10.0;

/// Generated table plus the cluster each row was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable {
    pub table: RawTable,
    pub labels: Vec<usize>,
}

/// Gaussian mixture with `g` unit-variance clusters, shifted so every feature
/// column has minimum 1. Row `i` belongs to cluster `i % g`. Coordinates are
/// uniform over the globe.
pub fn gen_synthetic(n: usize, d: usize, g: usize, seed: u64) -> Result<SyntheticTable> {
    if g == 0 || d == 0 || n < g {
        return Err(Error::InvalidParams(format!(
            "need rows >= clusters >= 1 and dims >= 1 (rows={n}, dims={d}, clusters={g})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..g * d).map(|_| rng.random_range(-CENTER_SPREAD..CENTER_SPREAD)).collect();

    let mut cells = Vec::with_capacity(n * d);
    let mut coords = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % g;
        labels.push(c);
        let lon = rng.random_range(-180.0..=180.0);
        let lat = rng.random_range(-90.0..=90.0);
        coords.push([lon, lat]);
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            cells.push(centers[c * d + j] + z);
        }
    }

    for j in 0..d {
        let min = (0..n).map(|i| cells[i * d + j]).fold(f64::INFINITY, f64::min);
        let shift = 1.0 - min;
        for i in 0..n {
            cells[i * d + j] += shift;
        }
    }

    let names = (0..d).map(|j| format!("f{j}")).collect();
    Ok(SyntheticTable { table: RawTable::new(names, Some(coords), cells)?, labels })
}
