//! Experiment orchestration: configuration, offline training, online
//! queries, reproductive sweeps, baselines and report files.

pub mod config;
pub mod initial;
pub mod pipeline;
pub mod queries;
pub mod report;
pub mod reproduce;

pub use config::{ExperimentConfig, ExperimentKind, Width};
pub use initial::generate_initial_conditions;
pub use pipeline::{run_training, run_training_pipeline, OfflineBundle, Training};
pub use queries::run_online_queries;
pub use report::{emit_reports, write_config, Manifest, RunRecord};
pub use reproduce::{run_baselines, run_reproductive_case, run_reproductive_suite, SweepSpec};
