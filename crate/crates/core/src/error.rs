use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A zero-inflated multinomial row with no active category.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("state error: {0}")]
    State(String),

    /// Raised by the chain driver when a kernel leaves the state outside the model support.
    #[error("invariant violated after {step}: {detail}")]
    Invariant { step: &'static str, detail: String },

    #[error("site {site}: only {finite} finite importance weights, {needed} required")]
    InsufficientWeights { site: usize, finite: usize, needed: usize },

    #[error("site {site}: zero posterior variance")]
    ZeroVariance { site: usize },

    #[error("{0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("chain store: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Structural(_) => "structural",
            Error::State(_) => "state",
            Error::Invariant { .. } => "invariant",
            Error::InsufficientWeights { .. } => "insufficient-weights",
            Error::ZeroVariance { .. } => "zero-variance",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::MissingArtifact(_) => "missing-artifact",
            Error::Store(_) => "store",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
