use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `η_{uc} = 0` and the user has no exploitation weight in the category.
    #[error("degenerate location distribution for user {user}, category {category}")]
    DegenerateDistribution { user: usize, category: usize },

    /// Every latent source of an observed check-in has zero probability.
    #[error("event {index} (user {user}, location {location}) has zero probability under every source")]
    DegenerateEvent {
        index: usize,
        user: usize,
        location: usize,
    },

    #[error("total intensity is identically zero for user {0}; no next event to predict")]
    NoPrediction(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
