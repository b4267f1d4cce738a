use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid semi-value: {0}")]
    InvalidSemivalue(String),

    #[error("custom weights are not normalized: sum of C(n-1,s-1)*p_s = {sum} (expected 1)")]
    NotNormalized { sum: f64 },

    #[error("semi-value `{0}` has no measure representation")]
    NoMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("player {player} out of range for a game with {n} players")]
    PlayerOutOfRange { player: usize, n: usize },

    #[error("utility {value} exceeds declared bound {bound}")]
    BoundViolated { value: f64, bound: f64 },

    #[error("game has {n} players; at most {max} supported here")]
    TooManyPlayers { n: usize, max: usize },

    #[error("invalid sampling vector: {0}")]
    InvalidSamplingVector(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("budget of {budget} evaluations is below the required minimum of {required}")]
    BudgetTooSmall { budget: u64, required: u64 },

    #[error("estimator `{estimator}` does not support `{semivalue}`")]
    OutOfScope {
        estimator: String,
        semivalue: String,
    },

    #[error("empirical system is rank deficient ({0})")]
    RankDeficient(String),

    #[error("normal equations are singular: {0}")]
    Singular(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("no exact oracle available: {0}")]
    NoOracle(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code used in machine-parsable diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSemivalue(_) => "invalid-semivalue",
            Error::NotNormalized { .. } => "not-normalized",
            Error::NoMeasure(_) => "no-measure",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::PlayerOutOfRange { .. } => "player-out-of-range",
            Error::BoundViolated { .. } => "bound-violated",
            Error::TooManyPlayers { .. } => "too-many-players",
            Error::InvalidSamplingVector(_) => "invalid-sampling-vector",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::BudgetTooSmall { .. } => "budget-too-small",
            Error::OutOfScope { .. } => "out-of-scope",
            Error::RankDeficient(_) => "rank-deficient",
            Error::Singular(_) => "singular",
            Error::UnknownEstimator(_) => "unknown-estimator",
            Error::NoOracle(_) => "no-oracle",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
