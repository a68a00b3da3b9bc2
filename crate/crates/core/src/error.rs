use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A face index outside `[0, 2(step-1)+1)` was supplied for `step`.
    #[error("face index {index} out of range at step {step}: only {faces} faces exist")]
    FaceIndexOutOfRange { step: usize, index: u64, faces: u64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid coupled pair: {0}")]
    InvalidPair(String),
}

pub type Result<T> = std::result::Result<T, Error>;
