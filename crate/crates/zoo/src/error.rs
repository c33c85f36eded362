use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] bdf_core::CoreError),

    #[error(transparent)]
    Model(#[from] bdf_model::ModelError),
}

pub type Result<T> = std::result::Result<T, ZooError>;
