use thiserror::Error;

/// Errors raised by the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("entity `{entity}` has no population entry")]
    MissingPopulation { entity: String },

    #[error("entity `{entity}` has nonpositive population {population}")]
    NonpositivePopulation { entity: String, population: i64 },

    #[error("shape mismatch: {context} (expected {expected}, got {got})")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("rank {rank} exceeds min(n, m) = {max_rank}")]
    RankTooLarge { rank: usize, max_rank: usize },

    #[error("matrix has a negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("fold count {folds} exceeds the {stratum} stratum size {size}; use a smaller fold count")]
    FoldCountTooLarge {
        folds: usize,
        stratum: &'static str,
        size: usize,
    },

    #[error("cluster count {g} exceeds the number of points {n}")]
    TooManyClusters { g: usize, n: usize },

    #[error("partitions cover different entity sets; only in first: {only_first:?}, only in second: {only_second:?}")]
    EntitySetMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },

    #[error("window end date {end} is not start + 7k - 1 days from {start}")]
    MisalignedWindow {
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
