//! Descent-ascent updates: Adam descent on weights and states, Adam ascent on
//! the multipliers, and frozen-weight state optimization for inference.

use super::lagrangian::{gradients, residuals, DropoutStream, GradientOptions, LagrangianTerms};
use super::model::{GraphBatch, LpGnnModel};
use super::LpError;
use crate::exec::Execution;
use crate::matrix::Matrix;
use crate::nn::AdamState;
use serde::{Deserialize, Serialize};

/// Multipliers above this magnitude are treated as divergence.
pub const MAX_MULTIPLIER: f64 = 1e6;

/// Free state variables X and multipliers Lambda, both |V| x s.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleVariables {
    pub states: Matrix,
    pub multipliers: Matrix,
}

impl SaddleVariables {
    pub fn zeros(num_nodes: usize, state_dim: usize) -> Self {
        Self {
            states: Matrix::zeros(num_nodes, state_dim),
            multipliers: Matrix::zeros(num_nodes, state_dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    /// For both the transition and readout weights.
    pub theta: f64,
    pub states: f64,
    pub multipliers: f64,
}

/// Adam state for the two variable groups optimized at inference time.
#[derive(Debug, Clone)]
pub struct StateOptimizers {
    pub states: AdamState,
    pub multipliers: AdamState,
}

impl StateOptimizers {
    pub fn new(num_nodes: usize, state_dim: usize) -> Self {
        Self {
            states: AdamState::new(num_nodes * state_dim),
            multipliers: AdamState::new(num_nodes * state_dim),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizers {
    pub h_net: AdamState,
    pub readout: AdamState,
    pub saddle: StateOptimizers,
}

impl Optimizers {
    pub fn new(model: &LpGnnModel, num_nodes: usize) -> Self {
        Self {
            h_net: AdamState::new(model.h_net.num_params()),
            readout: AdamState::new(model.readout.num_params()),
            saddle: StateOptimizers::new(num_nodes, model.state_dim()),
        }
    }
}

/// Quantities measured at the point where the gradient was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub loss: f64,
    pub constraint: f64,
    pub lagrangian: f64,
    pub mean_residual: f64,
    pub max_residual: f64,
    /// max |lambda| after the update.
    pub max_multiplier: f64,
    pub train_accuracy: f64,
}

impl StepDiagnostics {
    fn from_terms(t: &LagrangianTerms, max_multiplier: f64) -> Self {
        Self {
            loss: t.loss,
            constraint: t.constraint,
            lagrangian: t.value(),
            mean_residual: t.mean_residual,
            max_residual: t.max_residual,
            max_multiplier,
            train_accuracy: t.accuracy(),
        }
    }
}

fn update_saddle(
    vars: &mut SaddleVariables,
    opt: &mut StateOptimizers,
    dx: &Matrix,
    dlambda: &Matrix,
    rates: &LearningRates,
) -> Result<f64, LpError> {
    opt.states
        .step(vars.states.as_mut_slice(), dx.as_slice(), rates.states)?;
    opt.multipliers
        .ascent_step(vars.multipliers.as_mut_slice(), dlambda.as_slice(), rates.multipliers)?;
    let max_multiplier = vars.multipliers.max_abs();
    if !(max_multiplier <= MAX_MULTIPLIER) {
        return Err(LpError::Diverged {
            max_multiplier,
            lagrangian: f64::NAN,
        });
    }
    Ok(max_multiplier)
}

/// One simultaneous descent (weights, states) / ascent (multipliers) step.
pub fn train_step(
    model: &mut LpGnnModel,
    batch: &GraphBatch,
    vars: &mut SaddleVariables,
    opt: &mut Optimizers,
    rates: &LearningRates,
    dropout: Option<DropoutStream>,
    exec: Execution,
) -> Result<StepDiagnostics, LpError> {
    let grads = gradients(
        model,
        batch,
        &vars.states,
        &vars.multipliers,
        &GradientOptions {
            weights: true,
            dropout,
            exec,
        },
    )?;
    let lagrangian = grads.terms.value();
    if !lagrangian.is_finite() {
        return Err(LpError::Diverged {
            max_multiplier: vars.multipliers.max_abs(),
            lagrangian,
        });
    }
    opt.h_net
        .step(model.h_net.params_mut(), &grads.dtheta_h, rates.theta)?;
    opt.readout
        .step(model.readout.params_mut(), &grads.dtheta_r, rates.theta)?;
    let max_multiplier = update_saddle(vars, &mut opt.saddle, &grads.dx, &grads.dlambda, rates)
        .map_err(|e| with_lagrangian(e, lagrangian))?;
    Ok(StepDiagnostics::from_terms(&grads.terms, max_multiplier))
}

/// Descent-ascent on states and multipliers only; weights stay fixed and
/// dropout is off.
pub fn state_step(
    model: &LpGnnModel,
    batch: &GraphBatch,
    vars: &mut SaddleVariables,
    opt: &mut StateOptimizers,
    rates: &LearningRates,
    exec: Execution,
) -> Result<StepDiagnostics, LpError> {
    let grads = gradients(
        model,
        batch,
        &vars.states,
        &vars.multipliers,
        &GradientOptions {
            weights: false,
            dropout: None,
            exec,
        },
    )?;
    let lagrangian = grads.terms.value();
    let max_multiplier = update_saddle(vars, opt, &grads.dx, &grads.dlambda, rates)
        .map_err(|e| with_lagrangian(e, lagrangian))?;
    Ok(StepDiagnostics::from_terms(&grads.terms, max_multiplier))
}

fn with_lagrangian(e: LpError, value: f64) -> LpError {
    match e {
        LpError::Diverged { max_multiplier, .. } => LpError::Diverged {
            max_multiplier,
            lagrangian: value,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub max_steps: usize,
    pub lr_states: f64,
    pub lr_multipliers: f64,
    /// Converged once the mean absolute residual is at or below this value.
    pub tolerance: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            lr_states: 1e-2,
            lr_multipliers: 1e-2,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// States with the smallest mean residual seen.
    pub states: Matrix,
    pub multipliers: Matrix,
    pub mean_residual: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Test-time diffusion: optimizes the Lagrangian over fresh states and
/// multipliers (or `init`) with the model frozen. Supervision is ignored.
pub fn infer_states(
    model: &LpGnnModel,
    batch: &GraphBatch,
    cfg: &InferenceConfig,
    init: Option<SaddleVariables>,
    exec: Execution,
) -> Result<InferenceResult, LpError> {
    let n = batch.num_nodes();
    let s = model.state_dim();
    let unsupervised = batch.unsupervised();
    let mut vars = init.unwrap_or_else(|| SaddleVariables::zeros(n, s));
    let mut opt = StateOptimizers::new(n, s);
    let rates = LearningRates {
        theta: 0.0,
        states: cfg.lr_states,
        multipliers: cfg.lr_multipliers,
    };
    let mut best: Option<(f64, Matrix, Matrix)> = None;
    let mut steps = 0;
    loop {
        // residuals are measured at the point before each update
        let before = vars.clone();
        let residual = if steps < cfg.max_steps {
            state_step(model, &unsupervised, &mut vars, &mut opt, &rates, exec)?.mean_residual
        } else {
            mean_abs(&residuals(model, &unsupervised.graph, &unsupervised.index, &before.states, exec)?)
        };
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, before.states, before.multipliers));
        }
        if residual <= cfg.tolerance || steps == cfg.max_steps {
            break;
        }
        steps += 1;
    }
    let (mean_residual, states, multipliers) = best.expect("at least one evaluation");
    Ok(InferenceResult {
        states,
        multipliers,
        mean_residual,
        steps,
        converged: mean_residual <= cfg.tolerance,
    })
}

pub(crate) fn mean_abs(m: &Matrix) -> f64 {
    let n = m.as_slice().len();
    if n == 0 {
        0.0
    } else {
        m.as_slice().iter().map(|v| v.abs()).sum::<f64>() / n as f64
    }
}
