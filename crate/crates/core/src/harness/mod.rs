//! Experiment orchestration: configuration, data ingestion, runs and
//! reports. Everything here is single-threaded; parallelism lives in
//! [`crate::exec`].

pub mod artifacts;
pub mod cifar;
pub mod config;
mod experiment;
mod mode;
pub mod report;

pub use artifacts::{MetricsRow, TrajectoryRow};
pub use cifar::{load_cifar10, parse_cifar10, sample_patches};
pub use config::{ExperimentConfig, PotentialConfig, RawConfig};
pub use experiment::{
    build_potential, evaluate_record, execute, metrics_at, plateau_reached, prepare, reference_key, run_experiment,
    write_artifacts, RunOutput, Setup,
};
pub use mode::{find_mode, ModeSearch};
pub use report::{compare_report, ReportInput, ThresholdRow};
