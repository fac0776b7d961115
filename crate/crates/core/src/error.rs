use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular configuration: particles {i} and {j} at distance {distance:e}")]
    SingularConfiguration { i: usize, j: usize, distance: f64 },

    #[error("numerical blow-up at step {step}")]
    BlowUp { step: u64 },

    #[error("coupled trajectory diverged ({member}) at step {step}")]
    CoupledBlowUp { member: &'static str, step: u64 },

    #[error("pair distance {0} outside the domain of the pair potential")]
    Domain(f64),

    #[error("unsupported perturbation map order {0} (expected 1 or 2)")]
    UnsupportedOrder(u8),

    #[error("division by zero forcing: eta must be nonzero")]
    ZeroForcing,

    #[error("missing steady-state estimate for recentered TTCF")]
    MissingSteadyMean,

    #[error("burn-in {burn_in} must be shorter than the trajectory length {length}")]
    BurnIn { burn_in: f64, length: f64 },

    #[error("map exits truncated domain: shift {shift} exceeds {limit}")]
    MapExitsDomain { shift: f64, limit: f64 },

    #[error("linear solver failed: residual {residual:e} (tolerance {tolerance:e})")]
    Solver { residual: f64, tolerance: f64 },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("{failed} of {total} realizations failed, above the 1% limit")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("checksum mismatch for {0}")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
