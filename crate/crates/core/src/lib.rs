//! Product quantization over standardized tabular data.
//!
//! The pipeline is: ingest and clean a raw table ([`preprocess`]), standardize it,
//! train per-subspace k-means codebooks ([`kmeans`], [`pq`]), encode every row into
//! a short code whose mixed-radix collapse serves as a class label, then answer
//! nearest-neighbor and same-class ("analog") queries with lookup-table distances
//! ([`search`]). [`sweep`] runs (subspaces × centroids) grids and extracts the
//! error/time Pareto front. [`persistence`] owns every on-disk format.

pub mod cli;
pub mod error;
pub mod kmeans;
pub mod matrix;
pub mod persistence;
pub mod pq;
pub mod preprocess;
pub mod search;
pub mod sweep;

pub use error::{Error, Result};
pub use matrix::Matrix;
