use thiserror::Error;

use crate::report::ConditionReport;

/// Errors raised by constructors, evaluators and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("profile is not integrable: {0}")]
    NonIntegrable(String),

    #[error("profile vanishes identically")]
    ZeroProfile,

    #[error("distribution has total mass {0}, expected 1")]
    MassMismatch(f64),

    #[error("rejection sampler needs a finite density bound (estimated maximum {density_max})")]
    SamplerSetup { density_max: f64 },

    #[error("pure-translation kernel has no pointwise values; use translation_only_apply")]
    PureTranslation,

    #[error("unsupported check: {0}")]
    UnsupportedCheck(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("hypothesis `{check}` not satisfied")]
    HypothesisFailed {
        check: String,
        report: Box<ConditionReport>,
    },

    #[error("family index {j} outside 1..={horizon}")]
    IndexOutOfRange { j: u32, horizon: u32 },

    #[error("unknown test function {0:?}")]
    UnknownFunction(String),

    #[error("malformed grid function: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
