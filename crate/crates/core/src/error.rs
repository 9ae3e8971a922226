use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `log`/`transport` requested outside the injectivity ball (or at the
    /// sphere's antipode, where the minimizing geodesic is not unique).
    #[error("points are not joined by a unique minimizing geodesic: {0}")]
    BeyondInjectivity(String),

    #[error("point at distance {distance} lies outside the domain ball of radius {radius}")]
    Domain { distance: f64, radius: f64 },

    #[error("majorant argument {t} outside its domain [0, {end})")]
    MajorantDomain { t: f64, end: f64 },

    #[error("invalid radius query: {0}")]
    InvalidQuery(String),

    #[error("singular operator (smallest/largest singular value = {ratio:e})")]
    Singular { ratio: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
