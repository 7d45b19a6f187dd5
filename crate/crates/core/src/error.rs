use thiserror::Error;

/// Errors raised by the spectral kernels, the solvers and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dyadic block {q} outside the resolvable range [{min}, {max}]")]
    BlockOutOfRange { q: i32, min: i32, max: i32 },

    #[error("ladder range misses nonzero blocks {missing:?}")]
    InsufficientLadder { missing: Vec<i32> },

    #[error("analytic band exhausted at t = {time}: width {width}")]
    BandExhausted { time: f64, width: f64 },

    #[error("weight exponent {exponent} exceeds the overflow cap {cap}")]
    WeightOverflow { exponent: f64, cap: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("compatibility violated: {what} = {magnitude:e} (tolerance {tolerance:e})")]
    Compatibility {
        what: &'static str,
        magnitude: f64,
        tolerance: f64,
    },

    #[error("blow-up detected at t = {time}")]
    BlowUp { time: f64 },

    #[error("time stamps must be nondecreasing: {previous} then {current}")]
    NonMonotoneTime { previous: f64, current: f64 },

    #[error("time mismatch: {0} vs {1}")]
    TimeMismatch(f64, f64),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
