//! Clustering of nonnegative time series via weighted non-negative matrix
//! factorization.
//!
//! The pipeline: preprocess raw daily counts (per-million scaling, 7-day
//! smoothing), factor the series matrix with multiplicative-update WNMF from
//! a deterministic NNDSVD start, pick the rank by stratified masked
//! cross-validation, cluster the coefficient rows with multi-restart
//! k-means, and scan nested time windows for structural changes via the
//! adjusted Rand index between consecutive partitions.

pub mod cli;
pub mod compare;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod nndsvd;
pub mod preprocess;
pub mod rank_select;
pub mod temporal_scan;
pub mod types;
pub mod wnmf;

pub use error::{Error, Result};
