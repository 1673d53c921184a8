//! Configuration, experiment orchestration and report files.
//!
//! Each `cmd_*` function backs one subcommand of the `mfl-chaos` binary and
//! can be called directly. Outputs go to the directory passed in, or to the
//! config's `output_dir`; nothing is written when neither is set.

mod analysis;
mod commands;
pub mod config;
mod sweep;

pub use analysis::{analyze_sweep, EarlyFit, Level, Slope, Statistic, SweepAnalysis, TimeRow};
pub use commands::{
    cmd_entropy_chain, cmd_gibbs, cmd_poc_sweep, cmd_rate_fit, cmd_simulate, cmd_validate, fit_table,
    write_rate_report, ChainSummary, FitModel, FitRow, GibbsReport, HalvingRow, Manifest, PocReport,
    SimulateReport, TrajectoryRow, ValidateReport, CHAIN_TOL,
};
pub use config::ExperimentConfig;
pub use sweep::{initial_density, run_sweep, ReplicaRun, SizeRun, SweepRun};
