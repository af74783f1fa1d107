use thiserror::Error;

/// Errors raised by state construction, optics, homodyne and protocol routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state is not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("zero-norm state cannot be normalized")]
    ZeroNorm,

    #[error("non-finite amplitude in {0}")]
    NonFinite(&'static str),

    #[error("register `{0}` appears more than once")]
    DuplicateRegister(String),

    #[error("register `{0}` not present in state")]
    UnknownRegister(String),

    #[error("register `{name}` has invalid dimension {dim}")]
    InvalidDimension { name: String, dim: usize },

    #[error("mode index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("register layouts differ")]
    LayoutMismatch,

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("branch ({p}, {q}) is empty")]
    EmptyBranch { p: i32, q: i32 },

    #[error("no discrimination candidates supplied")]
    EmptyCandidates,

    #[error("empty parameter range")]
    EmptyRange,

    #[error("Schmidt coefficients must satisfy |alpha| >= |beta| >= |gamma|")]
    OrderingViolated,

    #[error("gamma = 0: state has Schmidt rank below three")]
    DegenerateRank,

    #[error("malformed JSON state: {0}")]
    Json(String),

    #[error("fixture data is malformed: {0}")]
    Fixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
