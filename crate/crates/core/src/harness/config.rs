use super::HarnessError;
use crate::datasets::{
    generate_clique, generate_subgraph_matching, load_tu_dataset, read_jsonl, CliqueParams, LabeledDataset,
    SubgraphParams, TaskKind,
};
use crate::lp::{Aggregation, ConstraintFunction, ConstraintVariant, InferenceConfig, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

/// Where the data for a run comes from. Synthetic tasks are generated from the
/// run seed, `3 * graphs_per_split` graphs at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    Subgraph {
        graphs_per_split: usize,
        graph_size: usize,
        subgraph_size: usize,
        edge_prob: f64,
        num_tags: usize,
    },
    Clique {
        graphs_per_split: usize,
        graph_size: usize,
        clique_size: usize,
        edge_prob: f64,
        num_tags: usize,
    },
    TuDirectory {
        path: PathBuf,
    },
    JsonlFile {
        path: PathBuf,
    },
}

impl TaskSpec {
    pub fn subgraph() -> Self {
        let d = SubgraphParams::default();
        TaskSpec::Subgraph {
            graphs_per_split: d.n_graphs,
            graph_size: d.graph_size,
            subgraph_size: d.subgraph_size,
            edge_prob: d.edge_prob,
            num_tags: d.num_tags,
        }
    }

    pub fn clique() -> Self {
        let d = CliqueParams::default();
        TaskSpec::Clique {
            graphs_per_split: d.n_graphs,
            graph_size: d.graph_size,
            clique_size: d.clique_size,
            edge_prob: d.edge_prob,
            num_tags: d.num_tags,
        }
    }

    /// Synthetic node tasks use the artificial-task grids.
    pub fn is_artificial(&self) -> bool {
        matches!(self, TaskSpec::Subgraph { .. } | TaskSpec::Clique { .. })
    }

    pub fn load(&self, seed: u64) -> Result<LabeledDataset, HarnessError> {
        let ds = match self {
            TaskSpec::Subgraph {
                graphs_per_split,
                graph_size,
                subgraph_size,
                edge_prob,
                num_tags,
            } => generate_subgraph_matching(&SubgraphParams {
                n_graphs: 3 * graphs_per_split,
                graph_size: *graph_size,
                subgraph_size: *subgraph_size,
                edge_prob: *edge_prob,
                num_tags: *num_tags,
                seed,
            })?,
            TaskSpec::Clique {
                graphs_per_split,
                graph_size,
                clique_size,
                edge_prob,
                num_tags,
            } => generate_clique(&CliqueParams {
                n_graphs: 3 * graphs_per_split,
                graph_size: *graph_size,
                clique_size: *clique_size,
                edge_prob: *edge_prob,
                num_tags: *num_tags,
                seed,
                ..Default::default()
            })?,
            TaskSpec::TuDirectory { path } => load_tu_dataset(path)?,
            TaskSpec::JsonlFile { path } => {
                let file = File::open(path).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
                read_jsonl(BufReader::new(file))?
            }
        };
        Ok(ds)
    }
}

pub const EPSILON_GRID: [f64; 3] = [0.0, 0.01, 0.1];
pub const ARTIFICIAL_STATE_DIMS: [usize; 3] = [5, 10, 35];
pub const CLASSIFICATION_STATE_DIMS: [usize; 5] = [10, 35, 50, 70, 150];
pub const ARTIFICIAL_HIDDEN_UNITS: [usize; 3] = [5, 20, 50];
pub const CLASSIFICATION_HIDDEN_UNITS: [usize; 5] = [5, 20, 50, 70, 150];
pub const DROPOUT_GRID: [f64; 2] = [0.0, 0.7];
pub const LR_THETA_GRID: [f64; 3] = [1e-5, 1e-4, 1e-3];
pub const ARTIFICIAL_LR_SADDLE: [f64; 3] = [1e-4, 1e-3, 1e-2];
pub const CLASSIFICATION_LR_SADDLE: [f64; 3] = [0.1, 0.01, 0.001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub constraint: ConstraintVariant,
    pub epsilon: f64,
    pub state_dim: usize,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub aggregation: Aggregation,
    pub dropout: f64,
    pub lr_theta: f64,
    pub lr_states: f64,
    pub lr_multipliers: f64,
    pub epochs: usize,
    /// Epochs without a validation improvement before a node-task run stops.
    pub patience: usize,
    /// Epochs between validation passes; the last epoch is always validated.
    pub validation_interval: usize,
    /// Number of folds for graph classification.
    pub folds: usize,
    /// Test-time state optimization.
    pub inference: InferenceConfig,
    pub seed: u64,
    /// Allows values outside the declared grids.
    pub custom: bool,
}

impl ExperimentConfig {
    /// Defaults for a synthetic node task.
    pub fn artificial(task: TaskSpec) -> Self {
        Self {
            task,
            constraint: ConstraintVariant::AbsEps,
            epsilon: 0.01,
            state_dim: 10,
            hidden_units: 20,
            hidden_layers: 1,
            aggregation: Aggregation::Sum,
            dropout: 0.0,
            lr_theta: 1e-3,
            lr_states: 1e-2,
            lr_multipliers: 1e-2,
            epochs: 5000,
            patience: 1000,
            validation_interval: 250,
            folds: 10,
            inference: InferenceConfig::default(),
            seed: 0,
            custom: false,
        }
    }

    /// Defaults for graph classification.
    pub fn classification(task: TaskSpec) -> Self {
        Self {
            epochs: 2000,
            validation_interval: 100,
            state_dim: 10,
            lr_states: 0.1,
            lr_multipliers: 0.1,
            inference: InferenceConfig {
                lr_states: 0.1,
                lr_multipliers: 0.1,
                ..InferenceConfig::default()
            },
            ..Self::artificial(task)
        }
    }

    pub fn constraint_function(&self) -> ConstraintFunction {
        ConstraintFunction::new(self.constraint, self.epsilon)
    }

    pub fn model_spec(&self, node_feature_dim: usize, arc_feature_dim: usize, num_classes: usize) -> ModelSpec {
        ModelSpec {
            state_dim: self.state_dim,
            node_feature_dim,
            arc_feature_dim,
            num_classes,
            hidden_units: self.hidden_units,
            hidden_layers: self.hidden_layers,
            dropout: self.dropout,
            aggregation: self.aggregation,
            constraint: self.constraint_function(),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Seed for weight initialization and dropout, derived from the hash.
    pub fn model_seed(&self) -> u64 {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Structural checks, plus grid membership unless `custom` is set.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.state_dim == 0 || self.hidden_units == 0 {
            return bad("state_dim and hidden_units must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon {} must be non-negative", self.epsilon));
        }
        for (name, lr) in [
            ("lr_theta", self.lr_theta),
            ("lr_states", self.lr_states),
            ("lr_multipliers", self.lr_multipliers),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} = {lr} must be finite and non-negative"));
            }
        }
        if self.epochs == 0 || self.validation_interval == 0 {
            return bad("epochs and validation_interval must be positive".into());
        }
        if self.folds < 2 {
            return bad("folds must be at least 2".into());
        }
        if self.custom {
            return Ok(());
        }
        let artificial = self.task.is_artificial();
        let (states, hidden, saddle): (&[usize], &[usize], &[f64]) = if artificial {
            (&ARTIFICIAL_STATE_DIMS, &ARTIFICIAL_HIDDEN_UNITS, &ARTIFICIAL_LR_SADDLE)
        } else {
            (&CLASSIFICATION_STATE_DIMS, &CLASSIFICATION_HIDDEN_UNITS, &CLASSIFICATION_LR_SADDLE)
        };
        let in_grid = |x: f64, grid: &[f64]| grid.iter().any(|&g| (x - g).abs() <= 1e-12 * g.abs().max(1.0));
        let checks = [
            (in_grid(self.epsilon, &EPSILON_GRID), "epsilon"),
            (states.contains(&self.state_dim), "state_dim"),
            (hidden.contains(&self.hidden_units), "hidden_units"),
            (in_grid(self.dropout, &DROPOUT_GRID), "dropout"),
            (in_grid(self.lr_theta, &LR_THETA_GRID), "lr_theta"),
            (in_grid(self.lr_states, saddle), "lr_states"),
            (in_grid(self.lr_multipliers, saddle), "lr_multipliers"),
            (self.hidden_layers == 1, "hidden_layers"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => bad(format!("{name} is outside the declared grid (set custom to allow)")),
            None => Ok(()),
        }
    }

    /// Task kind the configured data is expected to carry.
    pub fn expected_task(&self) -> Option<TaskKind> {
        match self.task {
            TaskSpec::Subgraph { .. } | TaskSpec::Clique { .. } => Some(TaskKind::NodeBinary),
            TaskSpec::TuDirectory { .. } => Some(TaskKind::GraphMulticlass),
            TaskSpec::JsonlFile { .. } => None,
        }
    }
}
