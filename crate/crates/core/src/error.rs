use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative intensity {value} for transition {from} -> {to}")]
    NegativeIntensity { from: String, to: String, value: f64 },

    #[error("asset {asset}: initial price must be > 0, got {value}")]
    NonPositivePrice { asset: String, value: f64 },

    #[error("horizon must be > 0, got {0}")]
    NonPositiveHorizon(f64),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unknown state label {0:?}")]
    UnknownState(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("intensity override is not equivalent to the model intensities")]
    NotEquivalent,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario {0} is not admissible for this model")]
    Inadmissible(String),

    #[error("inconsistent path prefix: {0}")]
    InconsistentPrefix(String),

    #[error("zero posterior support: no admissible continuation is consistent with the terminal log-price")]
    ZeroPosteriorSupport,

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("functional failed on path {index}: {message}")]
    Functional { index: usize, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dims(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    /// True for failures of the numerical kernels rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
