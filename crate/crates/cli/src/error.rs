use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] vqephase::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// 2 config, 3 resource guard, 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use vqephase::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Core(e) => match e {
                E::Budget(_) => 3,
                E::InvalidLattice(_) | E::SymmetryRejected(_) | E::InvalidInput(_) => 2,
                E::Io(_) => 1,
                _ => 4,
            },
            RunError::Io(_) | RunError::Csv(_) => 1,
        }
    }
}
