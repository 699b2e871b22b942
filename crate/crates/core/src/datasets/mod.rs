//! Benchmark data: synthetic subgraph-matching and clique tasks with exact
//! labels, TU-format graph classification corpora, and split management.

mod jsonl;
mod split;
mod synthetic;
mod tu;

pub use jsonl::{read_jsonl, write_jsonl, DATASET_FORMAT, DATASET_VERSION};
pub use split::{k_fold_split, train_val_test_split, Fold};
pub use synthetic::{
    clique_members, generate_clique, generate_subgraph_matching, max_clique_size, pattern_members,
    CliqueParams, Pattern, SubgraphParams,
};
pub use tu::{load_tu_dataset, max_degree_over};

use crate::graph::{Graph, GraphError};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing mandatory file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: node index {node} outside 1..={max}")]
    DanglingNode {
        file: String,
        line: usize,
        node: usize,
        max: usize,
    },
    #[error("graph indicator line {line}: graph id {got} breaks the contiguous ordering (expected {expected_prev} or {expected_next})")]
    NonContiguousIndicator {
        line: usize,
        got: usize,
        expected_prev: usize,
        expected_next: usize,
    },
    #[error("arc on line {line} joins nodes of different graphs")]
    ArcAcrossGraphs { line: usize },
    #[error("{0}")]
    InvalidParams(String),
    #[error("could not generate graph {graph} within {attempts} attempts (edge probability too high?)")]
    ResamplingExhausted { graph: usize, attempts: usize },
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("{0} items cannot be split into three equal parts")]
    NotDivisible(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    NodeBinary,
    GraphMulticlass,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Generated {
        generator: String,
        seed: u64,
        params: serde_json::Value,
    },
    TuDirectory {
        name: String,
        path: PathBuf,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub graphs: Vec<Graph>,
    pub task: TaskKind,
    pub num_classes: usize,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Feature widths (m, d) shared by all graphs.
    pub fn feature_dims(&self) -> (usize, usize) {
        self.graphs
            .first()
            .map(|g| (g.node_feature_dim(), g.arc_feature_dim()))
            .unwrap_or((0, 0))
    }

    /// Graph targets (graph tasks) in dataset order.
    pub fn graph_labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.graph_target().unwrap_or(0)).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<Graph> {
        idx.iter().map(|&i| self.graphs[i].clone()).collect()
    }

    /// Fraction of supervised nodes with target 1 (node tasks).
    pub fn positive_fraction(&self) -> f64 {
        let (pos, total) = self.graphs.iter().fold((0usize, 0usize), |(p, t), g| {
            (
                p + g.node_targets().iter().filter(|&&y| y == 1).count(),
                t + g.node_targets().len(),
            )
        });
        if total == 0 {
            0.0
        } else {
            pos as f64 / total as f64
        }
    }

    pub fn average_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.num_nodes()).sum::<usize>() as f64 / self.graphs.len() as f64
    }

    /// Checks the shared-dimension and class-range invariants.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (m, d) = self.feature_dims();
        for (i, g) in self.graphs.iter().enumerate() {
            if g.node_feature_dim() != m || g.arc_feature_dim() != d {
                return Err(DatasetError::Graph(GraphError::DimensionMismatch {
                    index: i,
                    m: g.node_feature_dim(),
                    d: g.arc_feature_dim(),
                    expected_m: m,
                    expected_d: d,
                }));
            }
            let bad = g
                .node_targets()
                .iter()
                .chain(g.graph_target().as_ref())
                .any(|&y| y >= self.num_classes);
            if bad {
                return Err(DatasetError::InvalidParams(format!(
                    "graph {i} has a class index >= {}",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }
}
