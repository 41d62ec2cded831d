//! Monte Carlo benchmark harness for the `apesmc` filters: repeated
//! simulation of a scenario, filter passes, error metrics and CSV output.

pub mod bank;
pub mod metrics;
pub mod output;
pub mod runner;

pub use metrics::{aggregate, mean_and_se, positional_rmse, relative_series, MetricSeries, RunRecord, StepRecord};
pub use runner::{beta_sweep, run_monte_carlo, run_single, FilterChoice, MonteCarloResult, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Core(#[from] apesmc::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(e) if matches!(e.root(), apesmc::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
