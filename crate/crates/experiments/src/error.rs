use thiserror::Error;

pub type Result<T> = std::result::Result<T, ExpError>;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kinetic_mf::error::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExpError {
    pub fn config(msg: impl Into<String>) -> Self {
        ExpError::Config(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure, 4 for a
    /// violated model hypothesis, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use kinetic_mf::error::Error as E;
        match self {
            ExpError::Config(_) => 2,
            ExpError::Core(e) if e.is_numerical() => 3,
            ExpError::Core(E::AssumptionViolation { .. }) => 4,
            ExpError::Core(
                E::InvalidParameter { .. }
                | E::DimensionMismatch { .. }
                | E::OutOfRange { .. }
                | E::Unnormalized { .. }
                | E::EmptyMeasure,
            ) => 2,
            _ => 1,
        }
    }
}
