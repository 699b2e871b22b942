//! Classical encoding by synchronous iteration `x_v <- f_{a,v}` until the
//! states stop moving. Serves as an oracle for the constraint-based states and
//! as an alternative inference path.

use crate::exec::Execution;
use crate::graph::{Graph, NeighborIndex};
use crate::lp::{transition_all, LpError, LpGnnModel};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Update norms above this are reported as divergence.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// A synchronous state update `X -> F(X)`.
pub trait StateMap {
    fn apply(&self, x: &Matrix) -> Result<Matrix, LpError>;
}

/// The learned transition function on one graph.
pub struct ModelTransition<'a> {
    pub model: &'a LpGnnModel,
    pub graph: &'a Graph,
    pub index: &'a NeighborIndex,
    pub exec: Execution,
}

impl StateMap for ModelTransition<'_> {
    fn apply(&self, x: &Matrix) -> Result<Matrix, LpError> {
        transition_all(self.model, self.graph, self.index, x, self.exec)
    }
}

impl<F> StateMap for F
where
    F: Fn(&Matrix) -> Matrix,
{
    fn apply(&self, x: &Matrix) -> Result<Matrix, LpError> {
        Ok(self(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub max_iterations: usize,
    /// Stop once max_v ||x_v(t) - x_v(t-1)||_inf falls to this value.
    pub tolerance: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub states: Matrix,
    pub iterations: usize,
    /// L-inf norm of the last update.
    pub update_norm: f64,
    pub converged: bool,
    pub diverged: bool,
    /// Update norm after each iteration.
    pub norm_history: Vec<f64>,
}

/// L-inf distance between two state matrices.
pub fn update_norm(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Per-node L-inf change `max_k |a_vk - b_vk|`.
pub fn node_update_norms(a: &Matrix, b: &Matrix) -> Vec<f64> {
    (0..a.rows())
        .map(|v| {
            a.row(v)
                .iter()
                .zip(b.row(v))
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        })
        .collect()
}

pub fn iterate<M: StateMap + ?Sized>(
    map: &M,
    x0: Matrix,
    cfg: &FixedPointConfig,
) -> Result<FixedPointReport, LpError> {
    if cfg.max_iterations == 0 || !(cfg.tolerance > 0.0) {
        return Err(LpError::Shape(format!(
            "fixed-point iteration needs max_iterations >= 1 and tolerance > 0, got {} / {}",
            cfg.max_iterations, cfg.tolerance
        )));
    }
    let mut x = x0;
    let mut history = Vec::new();
    let mut diverged = false;
    for _ in 0..cfg.max_iterations {
        let next = map.apply(&x)?;
        let norm = update_norm(&next, &x);
        history.push(norm);
        x = next;
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            diverged = true;
            break;
        }
        if norm <= cfg.tolerance {
            break;
        }
    }
    let update_norm = *history.last().unwrap();
    Ok(FixedPointReport {
        states: x,
        iterations: history.len(),
        update_norm,
        converged: !diverged && update_norm <= cfg.tolerance,
        diverged,
        norm_history: history,
    })
}

/// Iterates the model's transition function on `graph` from `x0`.
pub fn iterate_to_fixed_point(
    model: &LpGnnModel,
    graph: &Graph,
    index: &NeighborIndex,
    x0: Matrix,
    cfg: &FixedPointConfig,
    exec: Execution,
) -> Result<FixedPointReport, LpError> {
    model.check_graph(graph)?;
    let map = ModelTransition {
        model,
        graph,
        index,
        exec,
    };
    iterate(&map, x0, cfg)
}
