//! Episode metrics, the seeded benchmark harness, and artifact export.

mod benchmark;
mod export;
mod metrics;

pub use benchmark::{
    run_benchmark, run_cell, run_trial, summarize_trial, BenchmarkConfig, BenchmarkReport, CellResult, MeanStd,
    MethodKind, MethodSpec, TrialResult, REPORT_SCHEMA,
};
pub use export::{export_report, export_trace, speed_histogram, turning_histogram, Histogram};
pub use metrics::{energy_efficiency, extra_distance, step_speeds, success_rate, turning_angles, EnergyModel};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown method `{0}` (expected orca, sl, rl_no_kd or kd)")]
    UnknownMethod(String),
    #[error("method `{0}` needs a checkpoint")]
    MissingCheckpoint(String),
    #[error("method `{0}`: {1}")]
    Checkpoint(String, String),
    #[error("report: {0}")]
    Report(String),
    #[error("cannot write {0}: {1}")]
    Write(String, std::io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}
