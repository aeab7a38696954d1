use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(&'static str),

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("incomplete structure: stratum and cluster columns must both be present or both absent")]
    IncompleteStructure,

    #[error("cluster `{cluster}` appears under strata `{first}` and `{second}`")]
    ClusterInTwoStrata {
        cluster: String,
        first: String,
        second: String,
    },

    #[error("empty population")]
    EmptyPopulation,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("degenerate truncation window: normal mass between bounds underflows")]
    DegenerateTruncation,

    #[error("population of size {n} too small for trimming proportion {alpha}")]
    TrimTooLarge { n: usize, alpha: f64 },

    #[error("zero variance in `{0}`")]
    ZeroVariance(&'static str),

    #[error("design invariant violated: {0}")]
    InvalidDesign(String),

    #[error("πPS feasibility violated: n·max(x)/Σx = {ratio} must be < 1")]
    PpsInfeasible { ratio: f64 },

    #[error("design `{design}` is not supported by {operation}")]
    UnsupportedDesign {
        design: &'static str,
        operation: &'static str,
    },

    #[error("enumeration would produce {count} outcomes, above the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("degenerate Bowley denominator: Q(0.75) equals Q(0.25)")]
    DegenerateSpread,

    #[error("sample is missing RHC group totals")]
    MissingGroupTotals,

    #[error("sample is missing stratum/cluster metadata")]
    MissingClusterInfo,

    #[error("stratum {0} has no sampled units")]
    EmptyStratum(usize),

    #[error("relative bias undefined for a zero true value")]
    ZeroTrueValue,

    #[error("sampling rejected {0} times in a row")]
    RejectionLimit(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
