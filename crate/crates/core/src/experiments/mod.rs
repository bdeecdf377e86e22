//! Seeded experiment batteries over the world model, plus the statistics
//! used to summarize them.
//!
//! An [`ExperimentSpec`] expands into cells; each cell runs `repetitions`
//! independent worlds whose seeds are derived from
//! `(master_seed, experiment kind, cell, repetition)`. Every run is reduced
//! to long-format [`ResultRow`]s, and the [`Summary`] is computed from those
//! rows alone so it can be rebuilt from a results file.

mod runner;
mod spec;
pub mod stats;

use thiserror::Error;

use crate::econ::EconError;
use crate::world::SimError;

pub use runner::{
    cell_seed, execute, run_decile_analysis, run_dose_response, run_persona_experiment, run_sweep,
    run_validation, summarize, CellSummary, Comparison, ExperimentOutput, MetricSummary, ResultRow,
    Summary, DELTA_HISTOGRAM_WIDTH,
};
pub use spec::{
    parse_grid, parse_k_range, parse_sweep_label, socialist_tau_star, sweep_label, BackendSection, Cell,
    ExperimentKind, ExperimentSection, ExperimentSpec, NuVariant, OutputSection, Scale, SpecFile, ValidationId,
};
pub use stats::{aggregate, mann_whitney_u, mann_whitney_u_with, spearman, Aggregate, MannWhitney, PValueMethod, StatsError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("cell {cell}, repetition {repetition}: {source}")]
    Run {
        cell: String,
        repetition: usize,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("worker pool: {0}")]
    Pool(String),
}
