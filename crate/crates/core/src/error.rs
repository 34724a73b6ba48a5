use thiserror::Error;

use crate::viability::ViabilityVerdict;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature failed to reach tolerance {tol:e} on [{lo}, {hi}] (estimate {estimate:e})")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        tol: f64,
        estimate: f64,
    },
    #[error("insufficient mass: requested {requested}, available {available}")]
    InsufficientMass { requested: f64, available: f64 },
    #[error("jump measure is not special: integral of |x| ^ x^2 diverges")]
    NotSpecial,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no sign change of the growth derivative up to p = {last_hi:e} (last bracket [{last_lo:e}, {last_hi:e}])")]
    BracketFailure { last_lo: f64, last_hi: f64 },
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("arbitrage of the first kind detected: {0:?}")]
    ArbitrageDetected(ViabilityVerdict),
    #[error("jump measure has infinite activity; path simulation requires finite total mass")]
    InfiniteActivity,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("wealth became nonpositive at step {step}")]
    NonpositiveWealth { step: usize },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
