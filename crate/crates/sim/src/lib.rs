//! Seeded Monte Carlo sweeps over SNR and BS antenna count for the two-way
//! relay designs, with CSV/JSON output.

pub mod report;
pub mod spec;
pub mod sweep;

use twoway_core::design::Scheme;

pub use report::{aggregate, mean_stderr, write_csv, write_json, SummaryRow};
pub use spec::{BaseConfig, SweepPoint, SweepSpec};
pub use sweep::{run_sweep, run_trial, trial_seed, RunOptions, TrialRecord};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {scheme} at point {point}, trial {trial} (seed {seed}): {source}")]
    Numerical {
        scheme: Scheme,
        point: usize,
        trial: usize,
        seed: u64,
        source: twoway_core::Error,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

impl SimError {
    /// 1 for configuration and i/o problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Numerical { .. } => 2,
            _ => 1,
        }
    }
}
