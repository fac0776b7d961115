//! Run configuration, orchestration of realizations, persisted outputs.

mod config;
mod output;
mod runner;

pub use config::{Mode, RunConfig};
pub use output::{sha256_hex, Failure, OutputEntry, OutputSet, RunManifest, RunStatus, StreamRange, MANIFEST_FILE};
pub use runner::{
    decoupling_time, report, run_bias_1d, run_experiment, run_green_kubo_1d, run_nemd_1d, run_pilot, run_ttcf_1d,
    sample_gibbs_1d, FluidResults, PilotRow, RunOutcome, TtcfResults, CHUNK, MAX_FAILURE_FRACTION,
};
