use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("autoregressive system singular")]
    SingularSystem,
    #[error("Moran's I undefined for constant field")]
    ConstantField,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("day {day} outside simulated horizon 1..={horizon}")]
    DayOutOfRange { day: usize, horizon: usize },
    #[error("first-stage size {m} exceeds the {available} nonempty clusters")]
    TooManyClusters { m: usize, available: usize },
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("balancing moment matrix is singular after column pruning")]
    SingularMoments,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("missing value: {0}")]
    MissingValue(String),
    #[error("PPS side condition violated for clusters {0:?}")]
    SideCondition(Vec<usize>),
    #[error("unknown design `{0}`")]
    UnknownDesign(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
