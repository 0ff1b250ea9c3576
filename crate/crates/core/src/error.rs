use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("non-positive density {value} at grid index {index:?}")]
    NonPositiveDensity { index: [usize; 3], value: f64 },

    #[error("numerical blowup at t = {t} (last valid time {last_valid_time}): {reason}")]
    Blowup {
        t: f64,
        last_valid_time: f64,
        reason: String,
    },

    #[error("particle {id}: deformation determinant {det} is not positive (under-resolved flow)")]
    Underresolved { id: usize, det: f64 },

    #[error("|A| = {value} is below the floor {floor} at grid index {index:?}")]
    PotentialBelowFloor {
        index: [usize; 3],
        value: f64,
        floor: f64,
    },

    #[error("unknown diagnostic `{0}`")]
    UnknownDiagnostic(String),

    #[error("snapshots are not equally spaced: {0}")]
    IrregularSpacing(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("unsupported argument `{0}`")]
    UnsupportedArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::UnsupportedArgument(_) => 2,
            Error::Blowup { .. }
            | Error::NonPositiveDensity { .. }
            | Error::Underresolved { .. } => 3,
            _ => 1,
        }
    }
}
