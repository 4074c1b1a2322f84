use thiserror::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("state diverged at t = {t:.6}; pass --expect-divergence if this is intended")]
    BlowUp { t: f64 },
    #[error("witness infeasible: {0}")]
    Infeasible(String),
    #[error("residual check failed: |residual| = {residual:e} >= {tol:e}")]
    ResidualCheck { residual: f64, tol: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::BlowUp { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::ResidualCheck { .. } => 4,
        }
    }
}
