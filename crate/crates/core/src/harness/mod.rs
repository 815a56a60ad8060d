//! Convergence experiments: configs, cached reference solutions, sweeps,
//! CSV tables and SVG plots.

pub mod cache;
pub mod config;
pub mod plot;
pub mod selftest;
pub mod study;

pub use cache::{cache_dir, compute_reference, recompute_reference, ReferenceCache, ReferenceRequest};
pub use config::{ExperimentConfig, Norm, NormSelector, ReferenceSpec, TauRule};
pub use plot::{emit_plot, write_plot, PlotSpec};
pub use study::{
    group_series, read_records, run_convergence_study, write_records, ConvergenceRecord, Series,
    CSV_HEADER,
};
