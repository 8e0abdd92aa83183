use thiserror::Error;

/// Errors reported by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A channel coefficient on a detection group is numerically zero, so the
    /// phase correction of the MAP detector is undefined.
    #[error("degenerate channel: |lambda[{index}]| = {magnitude:e} is below the phase-correction threshold")]
    DegenerateChannel { index: usize, magnitude: f64 },

    /// The MAP detector would have to enumerate more PAM vectors than allowed.
    #[error("enumeration budget exceeded: J^(Q/2) = {required} PAM vectors for Q = {q}, J = {j}, limit is {budget}")]
    Capability {
        q: usize,
        j: usize,
        required: u128,
        budget: u64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
