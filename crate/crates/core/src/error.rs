use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch for {name}: expected {expected}, found {found}")]
    ShapeMismatch {
        name: String,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {name}")]
    NonFinite { name: String },

    #[error("{name} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { name: String, asymmetry: f64 },

    #[error("assumption violated: {condition} (smallest eigenvalue {eigenvalue:e})")]
    AssumptionViolated { condition: String, eigenvalue: f64 },

    #[error("matrix is not positive definite: {context}")]
    NotPositiveDefinite { context: String },

    #[error("integration became unstable at step {step} (entry magnitude {magnitude:e})")]
    StepUnstable { step: usize, magnitude: f64 },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("time {t} outside the domain [{lo}, {hi}]")]
    DomainError { t: f64, lo: f64, hi: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid problem file (key {key:?}): {message}")]
    InvalidProblemFile { key: Option<String>, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::AssumptionViolated { .. } => "AssumptionViolated",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::StepUnstable { .. } => "StepUnstable",
            Error::MeshMismatch(_) => "MeshMismatch",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DomainError { .. } => "DomainError",
            Error::DegenerateData(_) => "DegenerateData",
            Error::InvalidProblemFile { .. } => "InvalidProblemFile",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ShapeMismatch { .. }
                | Error::NonFinite { .. }
                | Error::NotSymmetric { .. }
                | Error::AssumptionViolated { .. }
                | Error::InvalidProblemFile { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidMesh(_)
                | Error::MeshMismatch(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
