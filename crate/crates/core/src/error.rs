use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("timestamp decreases at line {0}")]
    NonMonotoneTime(usize),
    #[error("non-positive price at line {0}")]
    NonPositivePrice(usize),
    #[error("empty input")]
    EmptyInput,

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("state count must be odd, got {0}")]
    EvenStateCount(usize),
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(&'static str),

    #[error("unknown state {0}")]
    UnknownState(u16),
    #[error("unknown index level {0}")]
    UnknownLevel(usize),
    #[error("no populated kernel cell for state {state} at any level")]
    MissingCell { state: u16, level: usize },
    #[error("invalid initial state {0}")]
    InvalidInitialState(u16),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("time {0} lies before the trajectory origin")]
    TimeBeforeOrigin(i64),
    #[error("horizon must be at least one step past the origin")]
    HorizonBeforeOrigin,

    #[error("series of length {len} too short for lag {tau_max}")]
    SeriesTooShort { len: usize, tau_max: usize },
    #[error("series has zero variance")]
    DegenerateVariance,
    #[error("autocorrelation curves use different lag grids")]
    LagGridMismatch,
    #[error("invalid first-passage threshold {0}")]
    InvalidThreshold(f64),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
