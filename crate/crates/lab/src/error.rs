use anderson_lab_core::{Error as CoreError, ErrorKind};

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Malformed config, arguments or function literals.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("I/O error: {0}")]
    Io(String),

    /// A value that would be written is NaN or infinite.
    #[error("non-finite value in statistic `{0}`")]
    NonFinite(String),

    /// Strict mode refused a flagged input.
    #[error("refused in strict mode: {0}")]
    Strict(String),

    /// A self-check reported violations.
    #[error("check failed: {0}")]
    Check(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            LabError::Core(e) => match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Numerical => 2,
                ErrorKind::Precondition => 3,
            },
            LabError::Io(_) | LabError::NonFinite(_) | LabError::Check(_) => 2,
            LabError::Strict(_) => 3,
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
