//! Batch driver for the pseudo-precipitation experiments.
//!
//! Every stage reads its inputs from the data directory, writes its products
//! back and returns one summary line for stdout. Logs go to stderr.

pub mod config;
pub mod stages;

pub use config::PipelineConfig;
pub use stages::Field;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pseudoprecip::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}; best checkpoint written to {checkpoint}")]
    Diverged { epoch: usize, checkpoint: String },
}

impl CliError {
    /// 2 = missing input or data, 3 = numeric failure, 4 = validation.
    pub fn exit_code(&self) -> i32 {
        use pseudoprecip::Error as E;
        match self {
            CliError::Core(E::Io { .. } | E::InsufficientData(_)) => 2,
            CliError::Core(E::NonFiniteLoss { .. } | E::SingularSystem { .. }) | CliError::Diverged { .. } => 3,
            CliError::Core(_) | CliError::Config(_) => 4,
        }
    }
}
