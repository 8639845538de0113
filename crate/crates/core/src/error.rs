use thiserror::Error;

/// Errors raised by game construction, learners and protocol runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A game tensor or input shape violates the model's invariants.
    #[error("validation error: {0}")]
    Validation(String),
    /// A requested tensor would exceed a size cap.
    #[error("cap exceeded: {what} = {value} exceeds limit {limit}")]
    Cap {
        what: &'static str,
        value: u128,
        limit: u128,
    },
    /// The random game generator ran out of its resample budget.
    #[error("generation error: {0}")]
    Generation(String),
    /// A numeric argument is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The follower could not commit a best-response predictor.
    #[error("commit error: {0}")]
    Commit(String),
    /// A parameter schedule could not be realized.
    #[error("schedule error: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
