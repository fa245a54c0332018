use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precision policy mismatch: {0} vs {1}")]
    PolicyMismatch(String, String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e}, tolerance {tolerance:e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rotation coding is ambiguous at step {step} even at {bits} bits")]
    AmbiguousBoundary { step: u64, bits: u32 },

    #[error("prefix of length {len} is too short to certify factors of length {n} (need {required})")]
    PrefixTooShort { len: usize, n: usize, required: usize },

    #[error("precision ledger violated at index {n}: epsilon {epsilon:e} > 1e-3 * delta ({delta:e}) at {bits} bits")]
    LedgerViolation { n: usize, epsilon: f64, delta: f64, bits: u32 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("bound chain violated: {0}")]
    BoundViolated(String),

    #[error("point is not on the probability simplex: {0}")]
    OffSimplex(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => "config",
            Error::LedgerViolation { .. } => "ledger",
            Error::ResourceLimit(_) => "resource",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
            _ => "numeric",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "ledger" => 3,
            "resource" => 4,
            _ => 1,
        }
    }
}
