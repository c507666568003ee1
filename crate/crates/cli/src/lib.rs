//! Library surface of the `eepn-lab` experiment harness: configuration
//! parsing, per-stage seed derivation, and the simulate / predict / compare /
//! prep-trace commands, exposed so integration tests can drive full runs
//! in-process.

pub mod commands;
pub mod config;
pub mod seeds;

pub use commands::{
    run_compare, run_predict, run_prep_trace, run_simulate, CompareReport, PredictOutputs,
    SimulateOutputs,
};
pub use config::{Config, ConfigError, NcdMode};
