use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("channel matrix must have at least one input and one output")]
    EmptyMatrix,
    #[error("row {row} is not a probability distribution (sum {sum}, min entry {min})")]
    RowNotStochastic { row: usize, sum: f64, min: f64 },
    #[error("output {output} is unreachable from every input")]
    UnreachableOutput { output: usize },
    #[error("idle symbol index {star} out of range for {inputs} inputs")]
    BadStarIndex { star: usize, inputs: usize },
    #[error("channel needs at least one non-idle input")]
    NoInformationInputs,
    #[error("distribution is invalid: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("support of the first distribution is not contained in the second")]
    SupportViolation,
    #[error("argument {0} outside the domain (0, 1)")]
    DomainError(f64),
    #[error("channel file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("alpha = {alpha} is not below the synchronization threshold {threshold}")]
    Infeasible { alpha: f64, threshold: f64 },

    #[error("parameter out of range: {0}")]
    RangeViolation(String),
    #[error("asynchronism window e^(n*alpha) = {requested:.3e} exceeds max_window {cap}; alpha <= {max_alpha:.6} fits")]
    WindowCapExceeded { requested: f64, cap: u64, max_alpha: f64 },
    #[error("Q-inverse argument {arg} left (0, 1); epsilon too small for this blocklength")]
    EpsilonTooSmall { arg: f64 },
    #[error("codebook of {m} x {n} symbols exceeds the cap of {cap}")]
    OutOfMemory { m: f64, n: usize, cap: u64 },

    #[error("time index {t} outside [1, {max}]")]
    TimeOutOfRange { t: u64, max: u64 },

    #[error("bound is vacuous: {0}")]
    DegenerateDenominator(String),
}
