//! Config-driven sweeps, validation suites and plot-script emission.

pub mod config;
pub mod plot;
pub mod sweep;
pub mod validate;

pub use config::{ExperimentConfig, MRule, RankPolicyKind, ResolvedConfig};
pub use plot::{emit_plots, PlotStyle};
pub use sweep::{
    read_rows, run_conditioning_sweep, run_sweep, write_outputs, write_rows, ResultRow, SweepOutput, SweepSummary,
};
pub use validate::{chernoff_experiment, random_cases, validate, Check, ChernoffOutcome, RandomCase, Suite, ValidationReport};
