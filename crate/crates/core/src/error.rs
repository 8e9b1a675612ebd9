use thiserror::Error;

/// Errors raised by factorization, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sketch has numerical rank {rank}, fewer than the requested {requested} columns")]
    RankDeficientSketch { rank: usize, requested: usize },

    #[error("core matrix is numerically singular (rcond = {rcond:e})")]
    SingularCore { rcond: f64 },

    #[error("core matrix is numerically rank deficient (rcond = {rcond:e})")]
    RankDeficientCore { rcond: f64 },

    #[error("sketch sizes s = {s}, r = {r} violate the discrepancy requirement")]
    DiscrepancyViolation { s: usize, r: usize },

    #[error("replicate update divides by a degenerate entry ({value:e})")]
    DegenerateEntry { value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag used in CSV `flags` columns.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::RankDeficientSketch { .. } => "rank_deficient_sketch",
            Error::SingularCore { .. } => "singular_core",
            Error::RankDeficientCore { .. } => "rank_deficient_core",
            Error::DiscrepancyViolation { .. } => "discrepancy_violation",
            Error::DegenerateEntry { .. } => "degenerate_entry",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::SolveFailure(_) => "solve_failure",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
