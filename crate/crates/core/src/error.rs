use thiserror::Error;

use crate::trainer::AdaptationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numerical stages of the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("matrix data has {found} values, expected {expected}")]
    DataLength { expected: usize, found: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("row {0} sums to {1}, expected 1")]
    RowNotNormalized(usize, f64),

    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    #[error("label {label} at index {index} is not below class count {k}")]
    LabelOutOfRange { index: usize, label: u32, k: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("empty view list")]
    EmptyViewList,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class count mismatch: {left} vs {right}")]
    ClassCountMismatch { left: usize, right: usize },

    #[error("anchor mean of class {0} has zero norm")]
    ZeroMeanVector(usize),

    #[error("no active class")]
    NoActiveClass,

    #[error("all candidate counts are zero")]
    AllCountsZero,

    #[error("invalid class prior: {0}")]
    InvalidPrior(String),

    #[error("class {0} carries prior mass but its cost column is inactive")]
    InactiveColumnHasMass(usize),

    #[error("cost entry ({row}, {col}) = {value} is outside [0, 2]")]
    CostOutOfRange { row: usize, col: usize, value: f64 },

    #[error("sinkhorn potentials became non-finite at iteration {iteration}")]
    NumericalDivergence { iteration: usize },

    #[error("teacher and student frozen parameters differ")]
    FrozenMismatch,

    #[error("epoch {epoch}: dual-consensus filter kept zero samples")]
    AllSamplesIgnored {
        epoch: usize,
        report: Box<AdaptationReport>,
    },

    #[error("no class has a defined IoU")]
    NoDefinedClass,

    #[error("no evaluated points")]
    EmptyEvaluation,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
