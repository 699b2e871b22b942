use super::config::ExperimentConfig;
use super::metrics::{mean_std, EpochRecord, InferenceSummary, RunStatus, RunSummary};
use super::HarnessError;
use crate::datasets::{k_fold_split, train_val_test_split, LabeledDataset, TaskKind};
use crate::exec::Execution;
use crate::lp::{
    accuracy, infer_states, splitmix, train_step, DropoutStream, GraphBatch, InferenceConfig, InferenceResult,
    LearningRates, LpError, LpGnnModel, Optimizers, SaddleVariables, StepDiagnostics,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub epochs: Vec<EpochRecord>,
    /// Weights at the selected epoch (node tasks).
    pub model: Option<LpGnnModel>,
    pub node_task: Option<NodeTaskArtifacts>,
}

/// Batches and states kept from a node-task run for later inspection.
#[derive(Debug, Clone)]
pub struct NodeTaskArtifacts {
    pub train: GraphBatch,
    /// Training states and multipliers at the selected epoch.
    pub train_states: SaddleVariables,
    pub test: GraphBatch,
    pub test_inference: InferenceResult,
}

/// Loads the configured data and runs the matching protocol.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let ds = cfg.task.load(cfg.seed)?;
    if let Some(expected) = cfg.expected_task() {
        if ds.task != expected {
            return Err(HarnessError::TaskMismatch(ds.task));
        }
    }
    match ds.task {
        TaskKind::NodeBinary => run_node_task(cfg, &ds, exec),
        TaskKind::GraphMulticlass => run_graph_classification(cfg, &ds, exec),
    }
}

/// Training-side state of one model being fit.
struct Trainer {
    model: LpGnnModel,
    train: GraphBatch,
    vars: SaddleVariables,
    opt: Optimizers,
    validation: GraphBatch,
    inference: InferenceConfig,
    interval: usize,
    last_epoch: usize,
    rates: LearningRates,
    dropout_seed: Option<u64>,
    exec: Execution,
}

impl Trainer {
    fn new(
        cfg: &ExperimentConfig,
        ds: &LabeledDataset,
        train: GraphBatch,
        validation: GraphBatch,
        seed: u64,
        exec: Execution,
    ) -> Result<Self, HarnessError> {
        let (m, d) = ds.feature_dims();
        let spec = cfg.model_spec(m, d, ds.num_classes);
        let model = LpGnnModel::new(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let n = train.num_nodes();
        Ok(Self {
            opt: Optimizers::new(&model, n),
            vars: SaddleVariables::zeros(n, cfg.state_dim),
            model,
            train,
            validation,
            inference: cfg.inference.clone(),
            interval: cfg.validation_interval,
            last_epoch: cfg.epochs,
            rates: LearningRates {
                theta: cfg.lr_theta,
                states: cfg.lr_states,
                multipliers: cfg.lr_multipliers,
            },
            dropout_seed: (cfg.dropout > 0.0).then_some(splitmix(seed)),
            exec,
        })
    }

    /// One training epoch. On validation epochs the validation states are
    /// inferred from scratch with the current weights, as at test time.
    fn epoch(&mut self, fold: usize, epoch: usize) -> Result<EpochRecord, LpError> {
        let dropout = self.dropout_seed.map(|s| DropoutStream {
            seed: splitmix(s ^ epoch as u64),
        });
        let d: StepDiagnostics = train_step(
            &mut self.model,
            &self.train,
            &mut self.vars,
            &mut self.opt,
            &self.rates,
            dropout,
            self.exec,
        )?;
        let (validation_accuracy, validation_residual) = if epoch % self.interval == 0 || epoch == self.last_epoch {
            let r = infer_states(&self.model, &self.validation, &self.inference, None, self.exec)?;
            (
                Some(accuracy(&self.model, &self.validation, &r.states)?),
                Some(r.mean_residual),
            )
        } else {
            (None, None)
        };
        Ok(EpochRecord {
            fold,
            epoch,
            loss: d.loss,
            constraint: d.constraint,
            lagrangian: d.lagrangian,
            mean_residual: d.mean_residual,
            max_residual: d.max_residual,
            max_multiplier: d.max_multiplier,
            train_accuracy: d.train_accuracy,
            validation_accuracy,
            validation_residual,
        })
    }
}

fn failed(mut summary: RunSummary, reason: impl ToString, epochs: Vec<EpochRecord>, started: Instant) -> RunOutcome {
    summary.status = RunStatus::Failed {
        reason: reason.to_string(),
    };
    summary.epochs_run = epochs.iter().map(|r| r.epoch).max().unwrap_or(0);
    summary.wall_clock_seconds = started.elapsed().as_secs_f64();
    RunOutcome {
        summary,
        epochs,
        model: None,
        node_task: None,
    }
}

/// Node-focused protocol: equal train/validation/test thirds, one batched
/// graph per split, selection by validation accuracy, test accuracy from
/// states inferred from scratch on the test graph.
pub fn run_node_task(cfg: &ExperimentConfig, ds: &LabeledDataset, exec: Execution) -> Result<RunOutcome, HarnessError> {
    if ds.task != TaskKind::NodeBinary {
        return Err(HarnessError::TaskMismatch(ds.task));
    }
    let started = Instant::now();
    let (tr, va, te) = train_val_test_split(ds.len(), cfg.seed)?;
    let train = GraphBatch::node_task_union(&ds.subset(&tr))?;
    let validation = GraphBatch::node_task_union(&ds.subset(&va))?;
    let test = GraphBatch::node_task_union(&ds.subset(&te))?;
    let mut t = Trainer::new(cfg, ds, train, validation, cfg.model_seed(), exec)?;
    let mut summary = RunSummary::new(cfg);
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, (Vec<f64>, Vec<f64>), SaddleVariables)> = None;
    let mut last_improvement = 0;
    for epoch in 1..=cfg.epochs {
        let row = match t.epoch(0, epoch) {
            Ok(r) => r,
            Err(e) => return Ok(failed(summary, e, rows, started)),
        };
        let validated = row.validation_accuracy;
        rows.push(row);
        if let Some(acc) = validated {
            let best_acc = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
            if acc > best_acc {
                last_improvement = epoch;
            }
            // ties go to the later epoch, whose states satisfy the constraints better
            if acc >= best_acc {
                best = Some((epoch, acc, t.model.snapshot(), t.vars.clone()));
            }
            if epoch - last_improvement >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_acc, snapshot, train_states) = best.expect("at least one epoch");
    t.model.restore(&snapshot)?;
    let test_inference = match infer_states(&t.model, &test, &cfg.inference, None, exec) {
        Ok(r) => r,
        Err(e) => return Ok(failed(summary, e, rows, started)),
    };
    let test_acc = accuracy(&t.model, &test, &test_inference.states)?;

    summary.epochs_run = rows.len();
    summary.best_epoch = best_epoch;
    summary.best_validation_accuracy = best_acc;
    summary.test_accuracy = Some(test_acc);
    summary.test_inference = Some(InferenceSummary {
        steps: test_inference.steps,
        mean_residual: test_inference.mean_residual,
        converged: test_inference.converged,
    });
    summary.mean_accuracy = test_acc;
    summary.final_mean_residual = rows[best_epoch - 1].mean_residual;
    summary.wall_clock_seconds = started.elapsed().as_secs_f64();
    summary.seconds_per_epoch = summary.wall_clock_seconds / rows.len() as f64;
    Ok(RunOutcome {
        summary,
        epochs: rows,
        model: Some(t.model),
        node_task: Some(NodeTaskArtifacts {
            train: t.train,
            train_states,
            test,
            test_inference,
        }),
    })
}

/// Stratified k-fold cross-validation. Every fold trains for the full epoch
/// budget; the reported epoch maximizes validation accuracy averaged over
/// folds and is shared by all of them.
pub fn run_graph_classification(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    exec: Execution,
) -> Result<RunOutcome, HarnessError> {
    if ds.task != TaskKind::GraphMulticlass {
        return Err(HarnessError::TaskMismatch(ds.task));
    }
    let started = Instant::now();
    let labels = ds.graph_labels();
    let folds = k_fold_split(&labels, cfg.folds, cfg.seed)?;
    for (i, f) in folds.iter().enumerate() {
        if f.validation.iter().any(|v| f.train.binary_search(v).is_ok()) {
            return Err(HarnessError::FoldLeak(i));
        }
    }
    let base_seed = cfg.model_seed();
    let fold_ids: Vec<usize> = (0..folds.len()).collect();
    let results = exec.map(&fold_ids, |&i| -> Result<Result<Vec<EpochRecord>, (LpError, Vec<EpochRecord>)>, HarnessError> {
        let f = &folds[i];
        let train = GraphBatch::graph_task(&ds.subset(&f.train))?;
        let validation = GraphBatch::graph_task(&ds.subset(&f.validation))?;
        let seed = splitmix(base_seed ^ (i as u64 + 1));
        let mut t = Trainer::new(cfg, ds, train, validation, seed, exec)?;
        let mut rows = Vec::with_capacity(cfg.epochs);
        for epoch in 1..=cfg.epochs {
            match t.epoch(i, epoch) {
                Ok(r) => rows.push(r),
                Err(e) => return Ok(Err((e, rows))),
            }
        }
        Ok(Ok(rows))
    });
    let mut summary = RunSummary::new(cfg);
    let mut per_fold = Vec::with_capacity(folds.len());
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Ok(rows) => per_fold.push(rows),
            Err((e, rows)) => {
                failure.get_or_insert(format!("fold {i}: {e}"));
                per_fold.push(rows);
            }
        }
    }
    let rows: Vec<EpochRecord> = per_fold.iter().flatten().cloned().collect();
    if let Some(reason) = failure {
        return Ok(failed(summary, reason, rows, started));
    }
    let k = per_fold.len() as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for e in 0..cfg.epochs {
        let accs: Option<Vec<f64>> = per_fold.iter().map(|f| f[e].validation_accuracy).collect();
        if let Some(accs) = accs {
            let mean = accs.iter().sum::<f64>() / k;
            if mean >= best.1 {
                best = (e, mean);
            }
        }
    }
    let fold_accuracies: Vec<f64> = per_fold
        .iter()
        .map(|f| f[best.0].validation_accuracy.unwrap_or(0.0))
        .collect();
    let (mean, std) = mean_std(&fold_accuracies);
    summary.epochs_run = cfg.epochs;
    summary.best_epoch = best.0 + 1;
    summary.best_validation_accuracy = mean;
    summary.mean_accuracy = mean;
    summary.std_accuracy = std;
    summary.fold_accuracies = fold_accuracies;
    summary.final_mean_residual = per_fold.iter().map(|f| f[best.0].mean_residual).sum::<f64>() / k;
    summary.wall_clock_seconds = started.elapsed().as_secs_f64();
    summary.seconds_per_epoch = summary.wall_clock_seconds / (cfg.epochs as f64 * k);
    Ok(RunOutcome {
        summary,
        epochs: rows,
        model: None,
        node_task: None,
    })
}

/// Accuracy and residual of a trained model on every graph of a dataset,
/// with states inferred from scratch.
pub fn evaluate(
    model: &LpGnnModel,
    ds: &LabeledDataset,
    inference: &crate::lp::InferenceConfig,
    exec: Execution,
) -> Result<(f64, InferenceResult), HarnessError> {
    let batch = match ds.task {
        TaskKind::NodeBinary => GraphBatch::node_task_union(&ds.graphs)?,
        TaskKind::GraphMulticlass => GraphBatch::graph_task(&ds.graphs)?,
    };
    model.check_graph(&batch.graph)?;
    let result = infer_states(model, &batch, inference, None, exec)?;
    let acc = accuracy(model, &batch, &result.states)?;
    Ok((acc, result))
}
