use thiserror::Error;

/// Errors raised by the selection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sensor subset is empty")]
    EmptySubset,

    #[error("row index {index} out of range for {rows} candidate rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("row index {0} appears more than once in the subset")]
    DuplicateIndex(usize),

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("objective evaluated to {value:e}, below the round-off tolerance for a PSD matrix")]
    NegativeObjective { value: f64 },

    #[error("no usable candidates: every candidate is already in the parent subset")]
    NoUsableCandidates,

    #[error("degenerate sketch at step {step}: no member could be extended")]
    DegenerateSketch { step: usize },

    #[error("refusing to enumerate {count} subsets (guard is {guard})")]
    GuardExceeded { count: u128, guard: u128 },

    #[error("matrix file: {0}")]
    MatrixFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
