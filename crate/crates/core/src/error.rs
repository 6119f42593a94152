//! Error types shared across the library.

use thiserror::Error;

/// Errors produced by dataset construction, transforms, distances,
/// clustering and index computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{row}: expected {expected} values, found {found}")]
    RaggedRow {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{row}:{column}: cannot parse {what}: {value:?}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        what: &'static str,
        value: String,
    },

    #[error("{path}:{row}: non-finite sample for scenario {scenario}, location {location}")]
    NonFinite {
        path: String,
        row: usize,
        scenario: u64,
        location: u64,
    },

    #[error("duplicate record for scenario {scenario}, location {location}")]
    DuplicateRecord { scenario: u64, location: u64 },

    #[error("dataset too small: {n} records (need at least 2)")]
    DatasetTooSmall { n: usize },

    #[error("series length {t} too short (need T > 1)")]
    SeriesTooShort { t: usize },

    #[error("expected preprocessing {expected}, dataset is {found}")]
    PreprocessingMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("record {index} (scenario {scenario}, location {location}) has zero variance")]
    ConstantRecord {
        index: usize,
        scenario: u64,
        location: u64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("zero-variance overlap segment at lag {lag}")]
    ZeroVarianceAtLag { lag: i64 },

    #[error("band {band} too small for length difference {diff}")]
    BandTooSmall { band: usize, diff: usize },

    #[error("distance kernel failed for pair ({i}, {j}): {source}")]
    PairFailure {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("representation has no basis; reconstruction undefined")]
    BasisAbsent,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid cluster count k={k} for {n} records")]
    InvalidK { k: usize, n: usize },

    #[error("member set is empty")]
    EmptyMembers,

    #[error("bandwidth bisection failed for point {index}: {reason}")]
    BisectionFailure { index: usize, reason: String },

    #[error("matrix size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
