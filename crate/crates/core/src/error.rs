use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid piecewise-constant schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("invalid market: {0}")]
    InvalidMarket(String),
    #[error("coefficient breakpoint at t={0} is not a grid node")]
    BreakpointOffGrid(f64),
    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),
    #[error("invalid measure change: psi={0} must be greater than -1")]
    InvalidMeasureChange(f64),
    #[error("invalid claim: {0}")]
    InvalidClaim(String),
    #[error("too few paths for regression: {paths} paths for {basis} basis functions (need 10x)")]
    TooFewPaths { paths: usize, basis: usize },
    #[error("singular regression design with {basis} basis functions")]
    SingularRegression { basis: usize },
    #[error("step size too large: dt*K = {0} must be below 1")]
    StepSize(f64),
    #[error("Picard iteration is not contracting; distances {0:?}")]
    Divergence(Vec<f64>),
    #[error("gamma {gamma} must exceed {required}")]
    GammaTooSmall { gamma: f64, required: f64 },
    #[error("degenerate zero-coupon price before default at node {node}")]
    DegenerateBond { node: usize },
    #[error("non-integrable data: {0}")]
    NonIntegrable(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("configuration mismatch: {0}")]
    Mismatch(String),
}
