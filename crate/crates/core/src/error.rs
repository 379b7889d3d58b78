use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular kernel input: the two points coincide on the cylinder")]
    SingularPair,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("operation requires a non-empty blob ensemble")]
    EmptyEnsemble,

    #[error("non-finite velocity at blob indices {indices:?}")]
    NonFiniteVelocity { indices: Vec<usize> },

    #[error("blob {index} lies outside the raster grid")]
    OutOfGrid { index: usize },

    #[error(
        "initial support radius {support} is not below r0/2 - h = {limit}; \
         the iteration needs mu_0(R_j, h) = 0 for every j"
    )]
    SupportViolation { support: f64, limit: f64 },

    #[error("step count too small: halving comparison changed rho(t1) by {relative_change:e} (limit 1e-6)")]
    StepCountTooSmall { relative_change: f64 },

    #[error("insufficient samples for the growth fit: {have} samples spanning a factor {span:.3} in t (need >= 8 spanning >= 5)")]
    InsufficientSamples { have: usize, span: f64 },

    #[error("decay envelope exceeded: max |dG/dx2| / envelope = {max_ratio:.6} at separation {at:?}")]
    EnvelopeExceeded { max_ratio: f64, at: (f64, f64) },

    #[error("diagnostics schedule must be strictly increasing (violated at position {position})")]
    ScheduleNotMonotone { position: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint schema version {found} does not match the supported version {expected}")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::SchemaMismatch { .. }
            | Error::ScheduleNotMonotone { .. } => 2,
            Error::Io(_) => 4,
            Error::Json(e) if e.is_io() => 4,
            Error::Json(_) => 2,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 4,
            Error::Csv(_) => 2,
            Error::SingularPair
            | Error::EmptyEnsemble
            | Error::NonFiniteVelocity { .. }
            | Error::OutOfGrid { .. }
            | Error::SupportViolation { .. }
            | Error::StepCountTooSmall { .. }
            | Error::InsufficientSamples { .. }
            | Error::EnvelopeExceeded { .. } => 3,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
