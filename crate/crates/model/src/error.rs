use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at {context}: loss = {loss}")]
    Diverged { context: String, loss: f64 },

    #[error(transparent)]
    Core(#[from] bdf_core::CoreError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
