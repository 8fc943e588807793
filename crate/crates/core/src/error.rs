use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transition matrix is not stochastic: {0}")]
    NonStochasticMatrix(String),

    #[error("regime chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("all regimes must share the same autoregressive order")]
    InconsistentOrder,

    #[error("truncated stationary series has not converged (last term / partial sum = {ratio:e})")]
    TruncationNotConverged { ratio: f64 },

    #[error("coefficient matrices are not upper triangular")]
    NotTriangular,

    #[error("coefficient matrices do not commute")]
    NotCommuting,

    #[error("coefficient matrices are not simultaneously diagonalizable")]
    NotSimultaneouslyDiagonalizable,

    #[error("first matrix is not of the form diag(delta, 0): {0}")]
    NonCanonicalB1(String),

    #[error("singular second matrix has zero trace; the exponent is -inf")]
    ZeroTrace,

    #[error("fewer than 10 positive points in the decay tail window")]
    InsufficientTail,

    #[error("model fails condition (A); autocovariance bound not applicable")]
    NotSecondOrder,

    #[error("model is not certified stationary: {0}")]
    NotStationary(String),

    #[error("stationary regime-1 mass must lie strictly inside (0, 1), got {0}")]
    RhoOutOfUnit(f64),

    #[error("missing input series: {0}")]
    MissingInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
