//! Experiment harness around the training core: JSON experiment configs,
//! dataset files (CSV regression data, IDX digit data), a training loop
//! that logs metrics and saves models, gradient checking, and canned
//! comparison suites. The `tmaf` binary is a thin wrapper over this
//! library; integration tests drive the same entry points.

pub mod config;
pub mod dataset_csv;
pub mod error;
pub mod gradcheck;
pub mod idx;
pub mod runner;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use gradcheck::{run_gradcheck, GradcheckReport};
pub use runner::{run_eval, run_train, run_train_with_clock, EvalReport, TrainOutcome};
pub use suite::{run_suite, SuiteOptions};
