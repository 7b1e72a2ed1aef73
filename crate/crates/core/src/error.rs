use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest-point projection did not converge after {iterations} iterations (|phi| = {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("level-set gradient degenerate at {point:?}: |grad phi| = {norm:e}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("point {point:?} lies outside the tubular neighbourhood (|phi|/|grad phi| = {ratio:e})")]
    OutsideTube { point: [f64; 3], ratio: f64 },

    #[error("triangle {index} is degenerate (sqrt det g_h = {sqrt_det:e})")]
    DegenerateTriangle { index: usize, sqrt_det: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("conjugate gradients failed for time mode {mode} after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { mode: usize, iterations: usize, residual: f64 },

    #[error("incompatible data: zero-mode load sum {magnitude:e} (relative {relative:e})")]
    IncompatibleData { magnitude: f64, relative: f64 },

    #[error("too few time nodes for recovery: N = {0}, need N >= 2")]
    TooFewNodes(usize),

    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("OFF parse error at line {line}: {message}")]
    OffParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
