use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid time allocation: {0}")]
    InvalidAllocation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate segment {index}: length {length:e}")]
    DegenerateSegment { index: usize, length: f64 },
    #[error("KKT system is singular (pivot ratio {condition:e}, constraint residual {residual:e})")]
    SolverSingular { condition: f64, residual: f64 },
    #[error("time {t} outside trajectory span [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible total-time scale up to eta = {upper}")]
    BracketFailure { upper: f64 },
    #[error("collocation produced coincident consecutive points at index {index}")]
    DuplicateOutput { index: usize },
    #[error("sequence length {len} exceeds limit {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite activation in {layer}")]
    NumericFailure { layer: String },
    #[error("model output has zero L1 mass after clamping")]
    DegenerateOutput,
    #[error("fixed-size model for {expected} waypoints got {got}")]
    FixedSize { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty input: {0}")]
    Empty(String),
}
