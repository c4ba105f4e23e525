use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input.
    Config,
    /// A numerical routine failed.
    Numerical,
    /// A documented precondition (degeneracy, gap, sign) refused the input.
    Precondition,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("perturbation site {site:?} lies outside the box")]
    SupportOverflow { site: [i64; 2] },

    #[error("sub-box {lo:?}..={hi:?} is not contained in the box")]
    SubboxOutOfRange { lo: [i64; 2], hi: [i64; 2] },

    #[error("nesting margin violated: sub-box must sit at least one site inside the outer box")]
    MarginViolation,

    #[error("symmetric eigensolver did not converge (off-diagonal residual {residual:e})")]
    EigenConvergence { residual: f64 },

    #[error("shifted matrix is singular (zero pivot at row {index})")]
    SingularShift { index: usize },

    #[error("real energy {energy} lies within {distance:e} of the spectrum")]
    NearSpectrum { energy: f64, distance: f64 },

    #[error("energy {energy} is within eig_tol of an eigenvalue (degenerate)")]
    DegenerateEnergy { energy: f64 },

    #[error("jump at {jump} is only {distance:e} away from an eigenvalue (gap_tol {gap_tol:e})")]
    GapViolation { jump: f64, distance: f64, gap_tol: f64 },

    #[error("{which} is not an orthogonal projection (residual {residual:e})")]
    NotProjection { which: &'static str, residual: f64 },

    #[error("projection ranks differ: {p} vs {q}")]
    RankMismatch { p: usize, q: usize },

    #[error("perturbation is not sign-definite for alpha = {alpha}: min eigenvalue {min_eigenvalue:e}")]
    NotSignDefinite { alpha: i32, min_eigenvalue: f64 },

    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("statistic `{statistic}` produced a non-finite value ({value})")]
    NonFinite { statistic: String, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("statistic failed on realization (seed {seed}, index {index}): {source}")]
    Realization { seed: u64, index: u64, source: Box<Error> },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig { .. }
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::SupportOverflow { .. }
            | Error::SubboxOutOfRange { .. } => ErrorKind::Config,
            Error::EigenConvergence { .. }
            | Error::SingularShift { .. }
            | Error::InsufficientData { .. }
            | Error::NonFinite { .. } => ErrorKind::Numerical,
            Error::MarginViolation
            | Error::NearSpectrum { .. }
            | Error::DegenerateEnergy { .. }
            | Error::GapViolation { .. }
            | Error::NotProjection { .. }
            | Error::RankMismatch { .. }
            | Error::NotSignDefinite { .. }
            | Error::Precondition(_) => ErrorKind::Precondition,
            Error::Realization { source, .. } => match source.kind() {
                ErrorKind::Precondition => ErrorKind::Precondition,
                _ => ErrorKind::Numerical,
            },
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { field, reason: reason.into() }
    }
}
