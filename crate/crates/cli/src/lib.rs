//! Config parsing and experiment dispatch behind the `elax` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, Kind};
pub use run::{run_experiment, RunOutcome};

use elax_core::ElaxError;

/// Process exit status for an error.
pub fn exit_code(e: &ElaxError) -> i32 {
    match e {
        ElaxError::Config(_) | ElaxError::Usage(_) => 2,
        ElaxError::BlowUp { .. } => 3,
        ElaxError::Degenerate(_) => 4,
        ElaxError::Numerical(_) | ElaxError::Io(_) => 1,
    }
}
