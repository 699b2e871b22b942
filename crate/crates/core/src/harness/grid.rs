use super::config::{
    ExperimentConfig, ARTIFICIAL_HIDDEN_UNITS, ARTIFICIAL_LR_SADDLE, ARTIFICIAL_STATE_DIMS,
    CLASSIFICATION_HIDDEN_UNITS, CLASSIFICATION_LR_SADDLE, CLASSIFICATION_STATE_DIMS, DROPOUT_GRID, LR_THETA_GRID,
};
use super::metrics::{RunStatus, RunSummary};
use super::run::run_experiment;
use super::HarnessError;
use crate::exec::Execution;
use crate::lp::{Aggregation, ConstraintVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A finite hyperparameter space. Enumeration order is the nesting order of
/// the fields, the last field varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub constraints: Vec<(ConstraintVariant, f64)>,
    pub state_dims: Vec<usize>,
    pub hidden_units: Vec<usize>,
    pub aggregations: Vec<Aggregation>,
    pub dropouts: Vec<f64>,
    pub lr_theta: Vec<f64>,
    pub lr_states: Vec<f64>,
    pub lr_multipliers: Vec<f64>,
}

fn all_constraints() -> Vec<(ConstraintVariant, f64)> {
    let mut out = Vec::new();
    for v in ConstraintVariant::ALL {
        if v.is_epsilon_insensitive() {
            out.push((v, 0.01));
            out.push((v, 0.1));
        } else {
            out.push((v, 0.0));
        }
    }
    out
}

impl GridSpace {
    pub fn artificial() -> Self {
        Self {
            constraints: all_constraints(),
            state_dims: ARTIFICIAL_STATE_DIMS.to_vec(),
            hidden_units: ARTIFICIAL_HIDDEN_UNITS.to_vec(),
            aggregations: vec![Aggregation::Sum, Aggregation::Avg],
            dropouts: DROPOUT_GRID.to_vec(),
            lr_theta: LR_THETA_GRID.to_vec(),
            lr_states: ARTIFICIAL_LR_SADDLE.to_vec(),
            lr_multipliers: ARTIFICIAL_LR_SADDLE.to_vec(),
        }
    }

    pub fn classification() -> Self {
        Self {
            state_dims: CLASSIFICATION_STATE_DIMS.to_vec(),
            hidden_units: CLASSIFICATION_HIDDEN_UNITS.to_vec(),
            lr_states: CLASSIFICATION_LR_SADDLE.to_vec(),
            lr_multipliers: CLASSIFICATION_LR_SADDLE.to_vec(),
            ..Self::artificial()
        }
    }

    /// The one-point space holding `cfg`.
    pub fn single(cfg: &ExperimentConfig) -> Self {
        Self {
            constraints: vec![(cfg.constraint, cfg.epsilon)],
            state_dims: vec![cfg.state_dim],
            hidden_units: vec![cfg.hidden_units],
            aggregations: vec![cfg.aggregation],
            dropouts: vec![cfg.dropout],
            lr_theta: vec![cfg.lr_theta],
            lr_states: vec![cfg.lr_states],
            lr_multipliers: vec![cfg.lr_multipliers],
        }
    }

    fn radices(&self) -> [usize; 8] {
        [
            self.constraints.len(),
            self.state_dims.len(),
            self.hidden_units.len(),
            self.aggregations.len(),
            self.dropouts.len(),
            self.lr_theta.len(),
            self.lr_states.len(),
            self.lr_multipliers.len(),
        ]
    }

    pub fn len(&self) -> usize {
        self.radices().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th configuration in enumeration order, built on `base`.
    pub fn config_at(&self, base: &ExperimentConfig, mut i: usize) -> ExperimentConfig {
        let mut digits = [0usize; 8];
        for (d, r) in digits.iter_mut().zip(self.radices()).rev() {
            *d = i % r;
            i /= r;
        }
        let (variant, epsilon) = self.constraints[digits[0]];
        ExperimentConfig {
            constraint: variant,
            epsilon,
            state_dim: self.state_dims[digits[1]],
            hidden_units: self.hidden_units[digits[2]],
            aggregation: self.aggregations[digits[3]],
            dropout: self.dropouts[digits[4]],
            lr_theta: self.lr_theta[digits[5]],
            lr_states: self.lr_states[digits[6]],
            lr_multipliers: self.lr_multipliers[digits[7]],
            ..base.clone()
        }
    }

    pub fn enumerate(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        (0..self.len()).map(|i| self.config_at(base, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Position in the full enumeration.
    pub index: usize,
    pub summary: RunSummary,
}

/// Runs every configuration of `space` (or a seeded subsample of `budget`
/// of them) on `base`, cells in parallel, each cell single-threaded.
/// Results are ranked by validation accuracy; failed cells come last.
pub fn grid_search(
    space: &GridSpace,
    base: &ExperimentConfig,
    budget: Option<usize>,
    exec: Execution,
) -> Result<Vec<GridResult>, HarnessError> {
    let total = space.len();
    if total == 0 {
        return Err(HarnessError::Config("empty search space".into()));
    }
    let mut indices: Vec<usize> = match budget {
        Some(b) if b < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
            rand::seq::index::sample(&mut rng, total, b).into_vec()
        }
        _ => (0..total).collect(),
    };
    indices.sort_unstable();
    let mut results = exec.map(&indices, |&i| {
        let cfg = space.config_at(base, i);
        let summary = match run_experiment(&cfg, Execution::Sequential) {
            Ok(outcome) => outcome.summary,
            Err(e) => {
                let mut s = RunSummary::new(&cfg);
                s.status = RunStatus::Failed { reason: e.to_string() };
                s
            }
        };
        GridResult { index: i, summary }
    });
    results.sort_by(|a, b| {
        b.summary
            .status
            .is_ok()
            .cmp(&a.summary.status.is_ok())
            .then(
                b.summary
                    .best_validation_accuracy
                    .total_cmp(&a.summary.best_validation_accuracy),
            )
            .then(a.index.cmp(&b.index))
    });
    Ok(results)
}

#[derive(Serialize)]
struct SweepRow<'a> {
    rank: usize,
    index: usize,
    config_hash: &'a str,
    status: &'static str,
    reason: &'a str,
    constraint: ConstraintVariant,
    epsilon: f64,
    state_dim: usize,
    hidden_units: usize,
    aggregation: Aggregation,
    dropout: f64,
    lr_theta: f64,
    lr_states: f64,
    lr_multipliers: f64,
    best_epoch: usize,
    best_validation_accuracy: f64,
    test_accuracy: Option<f64>,
    mean_accuracy: f64,
    std_accuracy: f64,
}

/// One row per configuration, in rank order.
pub fn write_sweep_csv<W: Write>(results: &[GridResult], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for (rank, r) in results.iter().enumerate() {
        let s = &r.summary;
        let (status, reason) = match &s.status {
            RunStatus::Ok => ("ok", ""),
            RunStatus::Failed { reason } => ("failed", reason.as_str()),
        };
        w.serialize(SweepRow {
            rank: rank + 1,
            index: r.index,
            config_hash: &s.config_hash,
            status,
            reason,
            constraint: s.config.constraint,
            epsilon: s.config.epsilon,
            state_dim: s.config.state_dim,
            hidden_units: s.config.hidden_units,
            aggregation: s.config.aggregation,
            dropout: s.config.dropout,
            lr_theta: s.config.lr_theta,
            lr_states: s.config.lr_states,
            lr_multipliers: s.config.lr_multipliers,
            best_epoch: s.best_epoch,
            best_validation_accuracy: s.best_validation_accuracy,
            test_accuracy: s.test_accuracy,
            mean_accuracy: s.mean_accuracy,
            std_accuracy: s.std_accuracy,
        })?;
    }
    w.flush().map_err(|e| HarnessError::Io { path: "sweep csv".into(), source: e })?;
    Ok(())
}
