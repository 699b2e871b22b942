//! Lagrangian-propagation graph neural networks.
//!
//! Node states and Lagrange multipliers are free optimization variables; the
//! fixed-point diffusion constraint of a recurrent GNN is satisfied jointly
//! with weight learning by gradient descent-ascent on the Lagrangian.

pub mod datasets;
pub mod exec;
pub mod fixedpoint;
pub mod graph;
pub mod harness;
pub mod lp;
pub mod matrix;
pub mod nn;

pub use exec::Execution;
pub use graph::{disjoint_union, Graph, GraphBuilder, NeighborIndex};
pub use lp::{Aggregation, ConstraintFunction, ConstraintVariant, GraphBatch, LpGnnModel, ModelSpec};
pub use matrix::Matrix;
