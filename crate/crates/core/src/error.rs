use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pool: {0}")]
    InvalidPool(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("emission allocation undefined: {0}")]
    UndefinedAllocation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("duplicate snapshot key (date={date}, netuid={netuid})")]
    DuplicateKey { date: NaiveDate, netuid: u32 },

    #[error("fx series: {0}")]
    Fx(String),

    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular design: column(s) {columns:?} are linearly dependent on earlier columns")]
    SingularDesign { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("unknown characteristic `{0}`")]
    UnknownCharacteristic(String),

    #[error("missing upstream artifact {path}; run `{command}` first")]
    MissingArtifact { path: PathBuf, command: String },

    #[error("no eligible observations: {0}")]
    NoEligibleObservations(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
