//! Experiment layer: evaluation, primary-load sweeps, configuration, the
//! value-iteration oracle and plotting.

pub mod config;
pub mod mdp;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod sweep;

pub use config::{ConfigError, Diagnostic, ExperimentConfig, Mode};
pub use metrics::{evaluate, Controller, MetricsAccumulator, MetricsRecord};
pub use oracle::{
    oracle_gap, run_oracle, write_values_csv, GapReport, OracleController, OracleInstance, OracleRun, OracleSolution,
    DEFAULT_STATE_CEILING,
};
pub use sweep::{
    cell_seed, read_sweep_csv, run_cell, run_sweep, write_sweep_csv, CellFailure, CellKey, Stats, SweepResult, SweepRow,
};
