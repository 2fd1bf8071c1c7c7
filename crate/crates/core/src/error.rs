use thiserror::Error;

/// Errors raised by the geometry pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signature mismatch: {0} vs {1}")]
    SignatureMismatch(String, String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("order exhausted: requested partial ({i},{j}) from a jet of order {order}")]
    OrderExhausted { i: usize, j: usize, order: usize },

    #[error("singular jet operation `{op}` at constant term {value}")]
    Singular { op: &'static str, value: f64 },

    #[error("degenerate subspace")]
    DegenerateSubspace,

    #[error("invalid frame: normalization residual {0:e}")]
    InvalidFrame(f64),

    #[error("causal type mismatch: expected {expected}, self-inner-product {value:e}")]
    CausalMismatch { expected: &'static str, value: f64 },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("wrong component count: source {source_name} needs {expected}, got {got}")]
    WrongComponentCount { source_name: &'static str, expected: usize, got: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("point ({u}, {v}) outside the chart domain")]
    OutOfDomain { u: f64, v: f64 },

    #[error("degenerate conformal factor {0:e}")]
    DegenerateConformalFactor(f64),

    #[error("identically umbilic on the grid")]
    IdenticallyUmbilic,

    #[error("umbilic points inside grid: {0:?}")]
    UmbilicPoints(Vec<(f64, f64)>),

    #[error("separability failure: residual {0:e}")]
    NotSeparable(f64),

    #[error("mixed isothermic type")]
    MixedIsothermicType,

    #[error("base point on polar hyperplane at ({u}, {v})")]
    PolarHyperplane { u: f64, v: f64 },

    #[error("inconsistent fixed point: {0}")]
    InconsistentFixedPoint(String),

    #[error("branch mismatch: constraint residual {0:e}")]
    BranchMismatch(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
