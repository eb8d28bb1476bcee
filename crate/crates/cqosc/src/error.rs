use thiserror::Error;

/// Library-wide error type. Every variant carries a stable machine-readable
/// name (see [`Error::name`]) that the CLI surfaces on failure.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("grid too small: n = {n}, need at least {min}")]
    GridTooSmall { n: usize, min: usize },

    #[error("paths live on different time grids")]
    GridMismatch,

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("degenerate boundary-value problem: |sin(omega_Q (t_f - t_i))| = {value:.3e}")]
    DegenerateBvp { value: f64 },

    #[error("omega_c and omega_Q are resonant; first-order correction undefined")]
    Resonance,

    #[error("boundary data does not determine the coefficients (singular 4x4 system)")]
    SingularBoundarySystem,

    #[error("lattice system is singular or near-singular (pivot {pivot:.3e})")]
    SingularSystem { pivot: f64 },

    #[error("unstable integration step: dt * omega_c = {dt_omega:.3e} exceeds {limit}")]
    UnstableStep { dt_omega: f64, limit: f64 },

    #[error("momentum cutoff too small: tail estimate {tail:.3e} exceeds tolerance {tol:.3e}")]
    CutoffTooSmall { tail: f64, tol: f64 },

    #[error("eta regularizer {eta:.3e} is below the underflow floor")]
    EtaUnderflow { eta: f64 },

    #[error("window too small: truncation estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    WindowTooSmall { estimate: f64, tol: f64 },
}

impl Error {
    /// Stable machine-readable error name, used in CLI error reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::GridTooSmall { .. } => "GridTooSmall",
            Error::GridMismatch => "GridMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::InvalidConfig { .. } => "ConfigError",
            Error::DegenerateBvp { .. } => "DegenerateBVP",
            Error::Resonance => "Resonance",
            Error::SingularBoundarySystem => "SingularBoundarySystem",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::UnstableStep { .. } => "UnstableStep",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::EtaUnderflow { .. } => "EtaUnderflow",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
