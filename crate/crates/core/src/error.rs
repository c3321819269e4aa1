use thiserror::Error;

/// Errors produced by the paramix library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode range: m_lo = {m_lo} > m_hi = {m_hi}")]
    InvalidRange { m_lo: i64, m_hi: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range [{lo}, {hi}] for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: i64,
        lo: i64,
        hi: i64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix contains non-finite entries")]
    NonFiniteInput,

    #[error("equation-of-motion matrix is singular (parametric threshold)")]
    SingularMatrix,

    #[error("target S + 1 is singular (target sits at an infinite-gain point)")]
    SingularTarget,

    #[error("recovered pumps produce a singular equation-of-motion matrix")]
    SingularReconstruction,

    #[error("matrix is not physical: imaginary residue {residue:.3e} in the xp basis")]
    NotPhysical { residue: f64 },

    #[error("random pump set still unstable after {attempts} rescalings")]
    UnstableAfterRetries { attempts: usize },

    #[error("equation-of-motion matrix is unstable (min decay rate {min_decay_rate:.3e}, condition {condition:.3e})")]
    Unstable { min_decay_rate: f64, condition: f64 },

    #[error("target matrix has zero norm")]
    ZeroTarget,

    #[error("invalid circulator magnitude {0}; expected 0 < magnitude <= 1")]
    InvalidMagnitude(f64),

    #[error("no feasible point: every magnitude yields a singular or unstable reconstruction")]
    NoFeasiblePoint,

    #[error("malformed PGM: {0}")]
    MalformedPgm(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("sample rate {sample_rate_hz} Hz aliases a {max_freq_hz} Hz tone")]
    Aliasing {
        sample_rate_hz: f64,
        max_freq_hz: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (singular or unstable systems), as
    /// opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix
                | Error::SingularTarget
                | Error::SingularReconstruction
                | Error::UnstableAfterRetries { .. }
                | Error::Unstable { .. }
                | Error::NoFeasiblePoint
                | Error::NonFiniteInput
        )
    }

    /// Short machine-readable tag, used in CSV status columns.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid-range",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFiniteInput => "non-finite-input",
            Error::SingularMatrix => "singular-matrix",
            Error::SingularTarget => "singular-target",
            Error::SingularReconstruction => "singular-reconstruction",
            Error::NotPhysical { .. } => "not-physical",
            Error::UnstableAfterRetries { .. } => "unstable-after-retries",
            Error::Unstable { .. } => "unstable",
            Error::ZeroTarget => "zero-target",
            Error::InvalidMagnitude(_) => "invalid-magnitude",
            Error::NoFeasiblePoint => "no-feasible-point",
            Error::MalformedPgm(_) => "malformed-pgm",
            Error::GridTooSmall(_) => "grid-too-small",
            Error::Aliasing { .. } => "aliasing-error",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
