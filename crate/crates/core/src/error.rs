use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Levy measure does not integrate 1 ^ y")]
    NonIntegrableMeasure,
    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("grid has {got} points, need at least {needed}")]
    InsufficientGrid { needed: usize, got: usize },
    #[error("truncated first moment is zero")]
    DegenerateTruncation,
    #[error("root not bracketed in [{lo:e}, {hi:e}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    #[error("symbol is not certified unbounded")]
    UnboundedSymbolRequired,
    #[error("unsupported symbol: {0}")]
    UnsupportedSymbol(String),
    #[error("stable tail series unusable at z = {z:e}")]
    SeriesDivergence { z: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("jump counts differ ({left} vs {right})")]
    JumpCountMismatch { left: usize, right: usize },
    #[error("path has {got} jumps, limit is {limit}")]
    TooManyJumps { got: usize, limit: usize },
    #[error("no progress after {0} jumps")]
    ZeroProgress(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("plan marginal off by {0:e}")]
    MarginalMismatch(f64),
    #[error("horizon j_max = {j_max} too small for level {level}")]
    HorizonTooSmall { j_max: usize, level: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("non-positive data")]
    NonPositiveData,
}

pub type Result<T> = std::result::Result<T, Error>;
