use thiserror::Error;

use crate::model::LayoutViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("invalid layout: {}", format_violations(.0))]
    InvalidLayout(Vec<LayoutViolation>),

    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("station index {index} out of range for {n} stations")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("pair indices must differ, got ({0}, {0})")]
    SameIndex(usize),

    #[error("epoch has no augmented ranges")]
    MissingAugmented,

    #[error("rank-deficient system (condition {condition:e}); unsolvable at this geometry")]
    RankDeficient { condition: f64 },

    #[error("no reference station yields a solvable system")]
    NoSolvableReference,

    #[error("empty series")]
    EmptySeries,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn format_violations(v: &[LayoutViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
