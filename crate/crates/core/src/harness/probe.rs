use super::HarnessError;
use crate::exec::Execution;
use crate::graph::{Graph, GraphBuilder};
use crate::lp::{
    train_step, Aggregation, ConstraintFunction, ConstraintVariant, GraphBatch, LearningRates, LpGnnModel, ModelSpec,
    Optimizers, SaddleVariables,
};
use crate::matrix::Matrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Measured runs shorter than this are flagged as noisy.
const NOISE_FLOOR_SECONDS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub sizes: Vec<usize>,
    /// Out-arcs per node.
    pub average_degree: usize,
    pub state_dim: usize,
    pub hidden_units: usize,
    /// Each size repeats steps until at least this much time has passed.
    pub min_seconds: f64,
    pub seed: u64,
    pub exec: crate::exec::Execution,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 316, 1000, 3162, 10000],
            average_degree: 4,
            state_dim: 10,
            hidden_units: 20,
            min_seconds: 0.2,
            seed: 0,
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub nodes: usize,
    pub arcs: usize,
    /// |V| + |E|.
    pub size: usize,
    pub repetitions: usize,
    pub seconds_per_step: f64,
    /// Heap bytes of the state and multiplier matrices.
    pub state_bytes: usize,
    pub noisy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of ln(seconds per step) against ln(|V| + |E|).
    pub slope: f64,
    pub intercept: f64,
}

/// Random directed graph where every node has `degree` distinct out-arcs,
/// one random feature and a random binary target.
pub fn random_graph(n: usize, degree: usize, seed: u64) -> Result<Graph, HarnessError> {
    if n <= degree {
        return Err(HarnessError::Config(format!("{n} nodes cannot each have {degree} out-arcs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::with_capacity(n * degree);
    for u in 0..n {
        for t in sample(&mut rng, n - 1, degree) {
            let v = if t >= u { t + 1 } else { t };
            arcs.push((u, v));
        }
    }
    let features = Matrix::from_vec(n, 1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let targets = (0..n).map(|_| usize::from(rng.random_bool(0.5))).collect();
    Ok(GraphBuilder::new(n, arcs, features)
        .node_targets((0..n).collect(), targets)
        .build()?)
}

/// Least-squares fit `y = slope * x + intercept`.
fn fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Times full training steps on random graphs of increasing size.
pub fn scaling_probe(cfg: &ProbeConfig) -> Result<ProbeReport, HarnessError> {
    let (lo, hi) = (
        cfg.sizes.iter().copied().min().unwrap_or(0),
        cfg.sizes.iter().copied().max().unwrap_or(0),
    );
    if cfg.sizes.len() < 4 || lo == 0 || hi < 10 * lo {
        return Err(HarnessError::Config(
            "the probe needs at least 4 sizes spanning a factor of 10".into(),
        ));
    }
    let spec = ModelSpec {
        state_dim: cfg.state_dim,
        node_feature_dim: 1,
        arc_feature_dim: 0,
        num_classes: 2,
        hidden_units: cfg.hidden_units,
        hidden_layers: 1,
        dropout: 0.0,
        aggregation: Aggregation::Sum,
        constraint: ConstraintFunction::new(ConstraintVariant::AbsEps, 0.01),
    };
    let rates = LearningRates {
        theta: 1e-3,
        states: 1e-3,
        multipliers: 1e-3,
    };
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let graph = random_graph(n, cfg.average_degree, cfg.seed ^ i as u64)?;
        let arcs = graph.num_arcs();
        let batch = GraphBatch::node_task(graph);
        let mut model = LpGnnModel::new(&spec, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
        let mut vars = SaddleVariables::zeros(n, cfg.state_dim);
        let mut opt = Optimizers::new(&model, n);
        train_step(&mut model, &batch, &mut vars, &mut opt, &rates, None, cfg.exec)?;
        let started = Instant::now();
        let mut repetitions = 0;
        while repetitions < 3 || started.elapsed().as_secs_f64() < cfg.min_seconds {
            train_step(&mut model, &batch, &mut vars, &mut opt, &rates, None, cfg.exec)?;
            repetitions += 1;
        }
        let elapsed = started.elapsed().as_secs_f64();
        rows.push(ProbeRow {
            nodes: n,
            arcs,
            size: n + arcs,
            repetitions,
            seconds_per_step: elapsed / repetitions as f64,
            state_bytes: vars.states.heap_bytes() + vars.multipliers.heap_bytes(),
            noisy: elapsed < NOISE_FLOOR_SECONDS,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.size as f64).ln(), r.seconds_per_step.ln()))
        .collect();
    let (slope, intercept) = fit(&points);
    Ok(ProbeReport {
        rows,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fit() {
        let (s, c) = fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((s - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_graph_degree() {
        let g = random_graph(50, 4, 1).unwrap();
        assert_eq!(g.num_arcs(), 200);
        assert!(g.arcs().iter().all(|&(u, v)| u != v));
        assert!(random_graph(4, 4, 1).is_err());
    }

    #[test]
    fn narrow_size_range_rejected() {
        let cfg = ProbeConfig {
            sizes: vec![100, 200, 300, 400],
            ..Default::default()
        };
        assert!(matches!(scaling_probe(&cfg), Err(HarnessError::Config(_))));
    }

    #[test]
    fn state_memory_is_linear() {
        let cfg = ProbeConfig {
            sizes: vec![20, 40, 80, 200],
            min_seconds: 0.0,
            ..Default::default()
        };
        let report = scaling_probe(&cfg).unwrap();
        for r in &report.rows {
            assert_eq!(r.state_bytes, 2 * r.nodes * cfg.state_dim * 8);
        }
    }
}
