use szego_core::SzegoError;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const VERIFICATION: i32 = 2;
    pub const BLOW_UP: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const BAD_INPUT: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("bad input: {0}")]
    BadInput(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("blow-up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("window needs {required:.3e} steps, above the budget of {budget:.0e}")]
    Infeasible { required: f64, budget: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(SzegoError),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::BadInput(_) => exit::BAD_INPUT,
            LabError::Verification(_) => exit::VERIFICATION,
            LabError::BlowUp { .. } => exit::BLOW_UP,
            LabError::Infeasible { .. } => exit::INFEASIBLE,
            LabError::Io { .. } => exit::INTERNAL,
            LabError::Solver(_) => exit::INTERNAL,
        }
    }

    /// Short machine-readable status for the manifest.
    pub fn status(&self) -> &'static str {
        match self {
            LabError::BadInput(_) => "bad-input",
            LabError::Verification(_) => "verification-failed",
            LabError::BlowUp { .. } => "blow-up",
            LabError::Infeasible { .. } => "infeasible-window",
            LabError::Io { .. } | LabError::Solver(_) => "error",
        }
    }
}

impl From<SzegoError> for LabError {
    fn from(e: SzegoError) -> Self {
        match e {
            SzegoError::BlowUp { time, reason } => LabError::BlowUp { time, reason },
            SzegoError::Contract(msg) | SzegoError::Parse(msg) => LabError::BadInput(msg),
            e @ SzegoError::GridTooSmall { .. } => LabError::BadInput(e.to_string()),
            e @ SzegoError::SmallDivisor { .. } => LabError::Verification(e.to_string()),
            other => LabError::Solver(other),
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
