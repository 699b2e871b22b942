//! Constraint-based training of graph neural networks: the diffusion
//! constraint `G(x_v - f_{a,v}) = 0` is enforced through Lagrange multipliers
//! and solved jointly with weight learning by gradient descent-ascent.

mod constraint;
mod lagrangian;
mod model;
mod optim;

pub use constraint::{ConstraintFunction, ConstraintVariant};
pub use lagrangian::{
    accuracy, argmax, correct_count, gradients, lagrangian_value, readout_graph, readout_node,
    residuals, softmax_cross_entropy, transition_all, transition_forward, DropoutStream,
    GradientOptions, LagrangianGradients, LagrangianTerms,
};
pub use model::{
    aggregate_messages, Aggregation, GraphBatch, LpGnnModel, ModelCheckpoint, ModelSpec, Supervision,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use optim::{
    infer_states, state_step, train_step, InferenceConfig, InferenceResult, LearningRates, Optimizers,
    SaddleVariables, StateOptimizers, StepDiagnostics, MAX_MULTIPLIER,
};
pub(crate) use lagrangian::splitmix;

use crate::graph::GraphError;
use crate::nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {term}{}", .node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    NonFinite { node: Option<usize>, term: &'static str },
    #[error("diverged: max |lambda| = {max_multiplier:e}, lagrangian = {lagrangian}")]
    Diverged { max_multiplier: f64, lagrangian: f64 },
    #[error("graph readout over an empty component")]
    EmptyComponent,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
