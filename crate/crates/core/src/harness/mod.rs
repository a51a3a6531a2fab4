//! Replicated simulation studies, experiment configs and figure data.

pub mod config;
pub mod figures;
pub mod run;
pub mod study;
pub mod summary;

pub use config::{ExperimentConfig, SelectorSpec, Study};
pub use figures::{emit_figures_data, FigureId};
pub use run::{load_result, run_experiment, run_until, ExperimentResult, Record};
