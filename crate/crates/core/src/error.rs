use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero polynomial used as a denominator")]
    ZeroDenominator,

    #[error("evaluation at a pole: s = {0}")]
    PoleEvaluation(Complex64),

    #[error("repeated pole near {0}; only simple poles are supported")]
    UnsupportedMultiplicity(Complex64),

    #[error("pole {0} lies on the imaginary axis")]
    MarginalPole(Complex64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("spectrum cannot be factorized: {0}")]
    NonFactorizable(String),

    #[error("invalid power spectral density: {0}")]
    InvalidPsd(String),

    #[error("spectrum is not integrable: {0}")]
    Divergence(String),

    #[error("measurement carries no information (gamma_meas = {0})")]
    NoInformation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("closed loop is unstable; offending poles: {poles:?}")]
    Instability { poles: Vec<Complex64> },

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
