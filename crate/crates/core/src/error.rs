use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mean-reversion matrix is not stable: max Re(lambda) = {max_real}")]
    EigenvalueViolation { max_real: f64 },

    #[error("sigma*sigma' is singular: smallest/largest singular value = {ratio:e}")]
    SingularVolatility { ratio: f64 },

    #[error("r*I - A is singular")]
    SingularDrift,

    #[error("invalid scalar `{name}` = {value}")]
    BadScalar { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("time order violated: t0 = {t0}, t1 = {t1}")]
    BadTimeOrder { t0: f64, t1: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("grid size {k} below minimum {min}")]
    GridTooCoarse { k: usize, min: usize },

    #[error("rho(t) = {0} is not positive")]
    NegativeRho(f64),

    #[error("wealth must be positive, got {0}")]
    NonPositiveWealth(f64),

    #[error("consumption must be positive, got {0}")]
    BadConsumption(f64),

    #[error("Hamilton function is unbounded (M11 = {m11}, q1 = {q1})")]
    HamiltonUnbounded { m11: f64, q1: f64 },

    #[error("unknown strategy kind `{0}`")]
    UnknownKind(String),

    #[error("innovation covariance is not positive semidefinite (min eigenvalue {0:e})")]
    CovFactorizationFailure(f64),

    #[error("log-exact wealth scheme requires a wealth-proportional strategy")]
    SchemeMismatch,

    #[error("spread paths carry no Wiener increments; simulate them with the coupled Euler scheme")]
    MissingIncrements,

    #[error("invalid count `{name}` = {value}")]
    BadCount { name: &'static str, value: usize },

    #[error("strategy list does not contain the optimal strategy")]
    MissingOptimal,
}

impl Error {
    /// Stable identifier printed by the command-line front-end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EigenvalueViolation { .. } => "EigenvalueViolation",
            Error::SingularVolatility { .. } => "SingularVolatility",
            Error::SingularDrift => "SingularDrift",
            Error::BadScalar { .. } => "BadScalar",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::BadTimeOrder { .. } => "BadTimeOrder",
            Error::TimeOutOfRange { .. } => "TimeOutOfRange",
            Error::NonFinite => "NonFinite",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::NegativeRho(_) => "NegativeRho",
            Error::NonPositiveWealth(_) => "NonPositiveWealth",
            Error::BadConsumption(_) => "BadConsumption",
            Error::HamiltonUnbounded { .. } => "HamiltonUnbounded",
            Error::UnknownKind(_) => "UnknownKind",
            Error::CovFactorizationFailure(_) => "CovFactorizationFailure",
            Error::SchemeMismatch => "SchemeMismatch",
            Error::MissingIncrements => "MissingIncrements",
            Error::BadCount { .. } => "BadCount",
            Error::MissingOptimal => "MissingOptimal",
        }
    }

    /// True for errors caused by invalid model input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EigenvalueViolation { .. }
                | Error::SingularVolatility { .. }
                | Error::SingularDrift
                | Error::BadScalar { .. }
                | Error::DimensionMismatch(_)
                | Error::UnknownKind(_)
                | Error::BadCount { .. }
                | Error::GridTooCoarse { .. }
                | Error::MissingOptimal
        )
    }
}
