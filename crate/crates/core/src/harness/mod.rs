//! Experiment configuration, training protocols with validation-based model
//! selection, grid search and the scaling probe.

mod config;
mod grid;
mod metrics;
mod probe;
mod run;

pub use config::{
    ExperimentConfig, TaskSpec, ARTIFICIAL_HIDDEN_UNITS, ARTIFICIAL_LR_SADDLE, ARTIFICIAL_STATE_DIMS,
    CLASSIFICATION_HIDDEN_UNITS, CLASSIFICATION_LR_SADDLE, CLASSIFICATION_STATE_DIMS, DROPOUT_GRID, EPSILON_GRID,
    LR_THETA_GRID,
};
pub use grid::{grid_search, write_sweep_csv, GridResult, GridSpace};
pub use metrics::{
    mean_std, read_epochs_csv, write_epochs_csv, EpochRecord, InferenceSummary, RunStatus, RunSummary,
};
pub use probe::{random_graph, scaling_probe, ProbeConfig, ProbeReport, ProbeRow};
pub use run::{evaluate, run_experiment, run_graph_classification, run_node_task, NodeTaskArtifacts, RunOutcome};

use crate::datasets::{DatasetError, TaskKind};
use crate::graph::GraphError;
use crate::lp::LpError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] LpError),
    #[error("dataset holds a {0:?} task, which this protocol does not handle")]
    TaskMismatch(TaskKind),
    #[error("fold {0}: validation indices overlap the training indices")]
    FoldLeak(usize),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<GraphError> for HarnessError {
    fn from(e: GraphError) -> Self {
        HarnessError::Model(LpError::Graph(e))
    }
}
