//! Experiment orchestration: Δx sweeps over repeated training runs, the
//! augmented-retraining comparison, and CSV report emission.

mod config;
mod experiment;
mod report;

pub use config::{ExperimentConfig, PreprocessSection};
pub use experiment::{
    load_data, run_augmented, run_seeds, run_sweep, AuditReport, GainRow, MembershipRow, ModelKind,
    RunFailure, RunSeeds, SweepRow,
};
pub use report::{
    emit_report, read_gain_csv, read_sweep_csv, rebuild_report_files, summarize, summarize_gains,
    GainSummary, Stat, SummaryRow, FIG2_HEADER, GAIN_HEADER, SWEEP_HEADER,
};
