use super::config::ExperimentConfig;
use super::HarnessError;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One row of the per-epoch metrics table. Contains no wall-clock data so that
/// reruns produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    pub loss: f64,
    pub constraint: f64,
    pub lagrangian: f64,
    pub mean_residual: f64,
    pub max_residual: f64,
    pub max_multiplier: f64,
    pub train_accuracy: f64,
    /// Filled on validation epochs: accuracy and mean residual of states
    /// inferred from scratch on the validation graph.
    pub validation_accuracy: Option<f64>,
    pub validation_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed { reason: String },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub steps: usize,
    pub mean_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub status: RunStatus,
    pub epochs_run: usize,
    /// Selected epoch (shared across folds for cross-validation).
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
    /// Node tasks only.
    pub test_accuracy: Option<f64>,
    pub test_inference: Option<InferenceSummary>,
    /// Cross-validation only: validation accuracy per fold at the selected epoch.
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub final_mean_residual: f64,
    pub wall_clock_seconds: f64,
    pub seconds_per_epoch: f64,
}

impl RunSummary {
    pub(crate) fn new(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            config: config.clone(),
            status: RunStatus::Ok,
            epochs_run: 0,
            best_epoch: 0,
            best_validation_accuracy: 0.0,
            test_accuracy: None,
            test_inference: None,
            fold_accuracies: Vec::new(),
            mean_accuracy: 0.0,
            std_accuracy: 0.0,
            final_mean_residual: 0.0,
            wall_clock_seconds: 0.0,
            seconds_per_epoch: 0.0,
        }
    }

    /// Accuracy used to compare runs: test accuracy for node tasks, mean
    /// fold accuracy for cross-validation.
    pub fn headline_accuracy(&self) -> f64 {
        self.test_accuracy.unwrap_or(self.mean_accuracy)
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn write_epochs_csv<W: Write>(rows: &[EpochRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::Io { path: "metrics csv".into(), source: e })?;
    Ok(())
}

pub fn read_epochs_csv<R: std::io::Read>(input: R) -> Result<Vec<EpochRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[0.8, 0.9, 1.0]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!((s - 0.1).abs() < 1e-12);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn csv_roundtrip() {
        let row = EpochRecord {
            fold: 0,
            epoch: 3,
            loss: 0.1 + 0.2,
            constraint: -1e-300,
            lagrangian: 1.0 / 3.0,
            mean_residual: 0.0,
            max_residual: 2.5,
            max_multiplier: 7.0,
            train_accuracy: 0.5,
            validation_accuracy: Some(1.0),
            validation_residual: Some(f64::MIN_POSITIVE),
        };
        let mut buf = Vec::new();
        write_epochs_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("fold,epoch,loss,"));
        assert_eq!(read_epochs_csv(buf.as_slice()).unwrap(), vec![row]);
    }
}
