//! Library side of the `codesign` command: config loading and the `run`,
//! `analyze` and `plot` subcommands.

pub mod analyze;
pub mod config;
pub mod plot;
pub mod run;

pub use analyze::{analyze, cmd_analyze, AnalysisKind, Table};
pub use config::ExperimentConfig;
pub use plot::{cmd_plot, render, PlotKind};
pub use run::{cmd_run, Manifest, RunOptions, RunSummary};
