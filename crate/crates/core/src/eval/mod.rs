//! Accuracy, kappa-error diversity, the Friedman test, the experiment grid
//! and result export.

pub mod experiment;
pub mod export;
pub mod friedman;
pub mod metrics;

pub use experiment::{
    run_experiment, run_experiment_from_sources, DatasetFailure, DatasetSource, ExperimentGrid, ExperimentOutput,
    KappaRecord, RunResult, DEFAULT_RATIOS,
};
pub use friedman::{friedman, RankTable};
pub use metrics::{accuracy, kappa, kappa_error_points, KappaErrorPoint};
