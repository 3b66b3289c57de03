use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("power function with zero exponent has no inverse")]
    ZeroExponent,

    #[error("power function evaluated at non-positive argument {0}")]
    NonPositiveArgument(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bad parameter `{field}`: {reason}")]
    BadParam { field: String, reason: String },

    #[error("set of cone level {set_level} is outside the support of a level-{measure_level} measure")]
    ConeMismatch { set_level: usize, measure_level: usize },

    #[error("homogeneity indices differ: {0} vs {1}")]
    IndexMismatch(f64, f64),

    #[error("product level error: m = {m} exceeds i = {i}")]
    LevelError { m: usize, i: usize },

    #[error("invalid spectrum: {0}")]
    SpectrumInvalid(String),

    #[error("null-convergence cone: no finite approximation (level {level})")]
    NullConvOnly { level: usize },

    #[error("convolution hypothesis violated at level {level}, m = {m}")]
    HypothesisViolated { level: usize, m: usize },

    #[error("closed form not available at level {0}")]
    UnsupportedLevel(usize),

    #[error("factor rule not supported: {0}")]
    UnsupportedRule(String),

    #[error("assumption A violated: {0}")]
    AssumptionAViolated(String),

    #[error("unsupported count distribution: {0}")]
    UnsupportedCount(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("bad model: {0}")]
    BadModel(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn bad_param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::BadParam {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroExponent => "zero_exponent",
            Error::NonPositiveArgument(_) => "non_positive_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BadParam { .. } => "bad_param",
            Error::ConeMismatch { .. } => "cone_mismatch",
            Error::IndexMismatch(..) => "index_mismatch",
            Error::LevelError { .. } => "level_error",
            Error::SpectrumInvalid(_) => "spectrum_invalid",
            Error::NullConvOnly { .. } => "null_conv_only",
            Error::HypothesisViolated { .. } => "hypothesis_violated",
            Error::UnsupportedLevel(_) => "unsupported_level",
            Error::UnsupportedRule(_) => "unsupported_rule",
            Error::AssumptionAViolated(_) => "assumption_a_violated",
            Error::UnsupportedCount(_) => "unsupported_count",
            Error::RegimeMismatch(_) => "regime_mismatch",
            Error::BadModel(_) => "bad_model",
            Error::DomainError(_) => "domain_error",
            Error::UnsupportedModel(_) => "unsupported_model",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// True for errors caused by malformed or out-of-range input, as opposed
    /// to numeric or hypothesis failures on valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::BadParam { .. }
                | Error::SpectrumInvalid(_)
                | Error::BadModel(_)
                | Error::UnsupportedCount(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
