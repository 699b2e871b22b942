//! The LP-GNN model: transition network h, readout network, aggregation mode
//! and constraint function, plus the batched graph it is trained on.

use super::constraint::{ConstraintFunction, ConstraintVariant};
use super::LpError;
use crate::graph::{disjoint_union, DisjointUnion, Graph, NeighborIndex};
use crate::matrix::Matrix;
use crate::nn::{Activation, DenseNetwork, NetworkCheckpoint};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Avg,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Avg => "avg",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "avg" | "mean" => Ok(Aggregation::Avg),
            _ => Err(format!("unknown aggregation '{s}' (expected sum or avg)")),
        }
    }
}

impl Aggregation {
    /// Weight applied to each neighbor message of a node with `degree` neighbors.
    #[inline]
    pub fn weight(self, degree: usize) -> f64 {
        match self {
            Aggregation::Sum => 1.0,
            Aggregation::Avg if degree == 0 => 0.0,
            Aggregation::Avg => 1.0 / degree as f64,
        }
    }
}

/// Sums or averages per-neighbor messages; an empty neighborhood yields zeros.
pub fn aggregate_messages(mode: Aggregation, messages: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for m in messages {
        for (o, x) in out.iter_mut().zip(m) {
            *o += x;
        }
    }
    let w = mode.weight(messages.len());
    if w != 1.0 {
        for o in &mut out {
            *o *= w;
        }
    }
    out
}

/// Architecture choices for a fresh model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub state_dim: usize,
    pub node_feature_dim: usize,
    pub arc_feature_dim: usize,
    pub num_classes: usize,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub dropout: f64,
    pub aggregation: Aggregation,
    pub constraint: ConstraintFunction,
}

#[derive(Debug, Clone)]
pub struct LpGnnModel {
    pub h_net: DenseNetwork,
    pub readout: DenseNetwork,
    pub aggregation: Aggregation,
    pub constraint: ConstraintFunction,
    state_dim: usize,
    node_feature_dim: usize,
    arc_feature_dim: usize,
}

impl LpGnnModel {
    pub fn new<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self, LpError> {
        let s = spec.state_dim;
        let h_in = 2 * s + 2 * spec.node_feature_dim + 2 * spec.arc_feature_dim;
        let mut h_widths = vec![h_in];
        h_widths.extend(std::iter::repeat_n(spec.hidden_units, spec.hidden_layers));
        h_widths.push(s);
        let mut r_widths = vec![s];
        r_widths.extend(std::iter::repeat_n(spec.hidden_units, spec.hidden_layers));
        r_widths.push(spec.num_classes);
        // the transition output is bounded like the original GNN state
        let h_net = DenseNetwork::new(&h_widths, Activation::Tanh, Activation::Tanh, spec.dropout, rng)?;
        let readout = DenseNetwork::new(&r_widths, Activation::Tanh, Activation::Identity, spec.dropout, rng)?;
        Self::from_parts(
            h_net,
            readout,
            spec.aggregation,
            spec.constraint,
            s,
            spec.node_feature_dim,
            spec.arc_feature_dim,
        )
    }

    pub fn from_parts(
        h_net: DenseNetwork,
        readout: DenseNetwork,
        aggregation: Aggregation,
        constraint: ConstraintFunction,
        state_dim: usize,
        node_feature_dim: usize,
        arc_feature_dim: usize,
    ) -> Result<Self, LpError> {
        let expected = 2 * state_dim + 2 * node_feature_dim + 2 * arc_feature_dim;
        if h_net.input_width() != expected || h_net.output_width() != state_dim {
            return Err(LpError::Shape(format!(
                "h-net maps {} -> {}, expected {} -> {}",
                h_net.input_width(),
                h_net.output_width(),
                expected,
                state_dim
            )));
        }
        if readout.input_width() != state_dim {
            return Err(LpError::Shape(format!(
                "readout input width {} != state dim {}",
                readout.input_width(),
                state_dim
            )));
        }
        Ok(Self {
            h_net,
            readout,
            aggregation,
            constraint,
            state_dim,
            node_feature_dim,
            arc_feature_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn node_feature_dim(&self) -> usize {
        self.node_feature_dim
    }

    pub fn arc_feature_dim(&self) -> usize {
        self.arc_feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.readout.output_width()
    }

    /// Checks that a graph's feature widths fit this model.
    pub fn check_graph(&self, g: &Graph) -> Result<(), LpError> {
        if g.node_feature_dim() != self.node_feature_dim || g.arc_feature_dim() != self.arc_feature_dim {
            return Err(LpError::Shape(format!(
                "graph features (m={}, d={}) do not match model (m={}, d={})",
                g.node_feature_dim(),
                g.arc_feature_dim(),
                self.node_feature_dim,
                self.arc_feature_dim
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            aggregation: self.aggregation,
            constraint: self.constraint.variant,
            epsilon: self.constraint.epsilon,
            state_dim: self.state_dim,
            node_feature_dim: self.node_feature_dim,
            arc_feature_dim: self.arc_feature_dim,
            h_net: self.h_net.to_checkpoint(),
            readout: self.readout.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(c: ModelCheckpoint) -> Result<Self, LpError> {
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(LpError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        Self::from_parts(
            DenseNetwork::from_checkpoint(c.h_net)?,
            DenseNetwork::from_checkpoint(c.readout)?,
            c.aggregation,
            ConstraintFunction::new(c.constraint, c.epsilon),
            c.state_dim,
            c.node_feature_dim,
            c.arc_feature_dim,
        )
    }

    /// Copy of the learnable parameters (h-net, readout).
    pub fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        (self.h_net.params().to_vec(), self.readout.params().to_vec())
    }

    pub fn restore(&mut self, snapshot: &(Vec<f64>, Vec<f64>)) -> Result<(), LpError> {
        self.h_net.set_params(snapshot.0.clone())?;
        self.readout.set_params(snapshot.1.clone())?;
        Ok(())
    }
}

pub const CHECKPOINT_FORMAT: &str = "lpgnn-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON model checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub aggregation: Aggregation,
    pub constraint: ConstraintVariant,
    pub epsilon: f64,
    pub state_dim: usize,
    pub node_feature_dim: usize,
    pub arc_feature_dim: usize,
    pub h_net: NetworkCheckpoint,
    pub readout: NetworkCheckpoint,
}

/// The supervised part of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub enum Supervision {
    None,
    /// Node-focused: targets for the listed nodes.
    Nodes { nodes: Vec<usize>, targets: Vec<usize> },
    /// Graph-focused: one target per component, read out from mean component state.
    Graphs {
        components: Vec<Range<usize>>,
        targets: Vec<usize>,
    },
}

impl Supervision {
    pub fn len(&self) -> usize {
        match self {
            Supervision::None => 0,
            Supervision::Nodes { nodes, .. } => nodes.len(),
            Supervision::Graphs { components, .. } => components.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A (possibly batched) graph with its neighbor index, component layout and supervision.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub graph: Graph,
    pub index: NeighborIndex,
    pub components: Vec<Range<usize>>,
    pub supervision: Supervision,
}

impl GraphBatch {
    /// Node-focused batch; supervision taken from the graph's supervised nodes.
    pub fn node_task(graph: Graph) -> Self {
        let index = NeighborIndex::build(&graph);
        let supervision = Supervision::Nodes {
            nodes: graph.supervised_nodes().to_vec(),
            targets: graph.node_targets().to_vec(),
        };
        let components = vec![0..graph.num_nodes()];
        Self {
            graph,
            index,
            components,
            supervision,
        }
    }

    /// Node-focused batch over the disjoint union of `graphs`.
    pub fn node_task_union(graphs: &[Graph]) -> Result<Self, LpError> {
        let union = disjoint_union(graphs)?;
        let mut batch = Self::node_task(union.graph.clone());
        batch.components = union.components();
        Ok(batch)
    }

    /// Graph-focused batch; every input graph must carry a graph target.
    pub fn graph_task(graphs: &[Graph]) -> Result<Self, LpError> {
        let union: DisjointUnion = disjoint_union(graphs)?;
        let components = union.components();
        let targets = union
            .graph_targets
            .iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| LpError::Shape(format!("graph {i} has no graph target"))))
            .collect::<Result<Vec<_>, _>>()?;
        let graph = union.graph.without_node_targets();
        let index = NeighborIndex::build(&graph);
        Ok(Self {
            graph,
            index,
            supervision: Supervision::Graphs {
                components: components.clone(),
                targets,
            },
            components,
        })
    }

    /// Same graph, no supervision (inference).
    pub fn unsupervised(&self) -> Self {
        Self {
            graph: self.graph.clone(),
            index: self.index.clone(),
            components: self.components.clone(),
            supervision: Supervision::None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }
}

/// Builds the h-net input for owner `v` and neighbor entry `entry`:
/// `[x_u, l_u, l_(v,u), l_(u,v), x_v, l_v]`, zero-filling absent arcs.
pub(crate) fn h_input(
    g: &Graph,
    x: &Matrix,
    v: usize,
    entry: &crate::graph::NeighborEntry,
    out: &mut Vec<f64>,
) {
    out.clear();
    let u = entry.node;
    let d = g.arc_feature_dim();
    out.extend_from_slice(x.row(u));
    out.extend_from_slice(g.node_features().row(u));
    match entry.arc_out {
        Some(a) => out.extend_from_slice(g.arc_features().row(a)),
        None => out.extend(std::iter::repeat_n(0.0, d)),
    }
    match entry.arc_in {
        Some(a) => out.extend_from_slice(g.arc_features().row(a)),
        None => out.extend(std::iter::repeat_n(0.0, d)),
    }
    out.extend_from_slice(x.row(v));
    out.extend_from_slice(g.node_features().row(v));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use rand::SeedableRng;

    #[test]
    fn avg_and_sum_of_stub_messages() {
        let msgs = vec![vec![1.0, 3.0], vec![3.0, 5.0]];
        assert_eq!(aggregate_messages(Aggregation::Avg, &msgs, 2), vec![2.0, 4.0]);
        assert_eq!(aggregate_messages(Aggregation::Sum, &msgs, 2), vec![4.0, 8.0]);
        assert_eq!(aggregate_messages(Aggregation::Avg, &[], 2), vec![0.0, 0.0]);
    }

    #[test]
    fn model_widths_follow_input_layout() {
        let spec = ModelSpec {
            state_dim: 3,
            node_feature_dim: 4,
            arc_feature_dim: 2,
            num_classes: 2,
            hidden_units: 5,
            hidden_layers: 1,
            dropout: 0.0,
            aggregation: Aggregation::Sum,
            constraint: ConstraintFunction::new(ConstraintVariant::Abs, 0.0),
        };
        let m = LpGnnModel::new(&spec, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.h_net.widths(), &[2 * 3 + 2 * 4 + 2 * 2, 5, 3]);
        assert_eq!(m.readout.widths(), &[3, 5, 2]);
        let back = LpGnnModel::from_checkpoint(m.to_checkpoint()).unwrap();
        assert_eq!(back.h_net.params(), m.h_net.params());
    }

    #[test]
    fn h_input_zero_fills_missing_arc() {
        let g = GraphBuilder::new(2, vec![(0, 1)], Matrix::from_rows(1, &[vec![7.0], vec![8.0]]))
            .arc_features(Matrix::from_rows(1, &[vec![0.5]]))
            .build()
            .unwrap();
        let idx = NeighborIndex::build(&g);
        let x = Matrix::from_rows(1, &[vec![1.0], vec![2.0]]);
        let mut buf = Vec::new();
        // owner 1, neighbor 0: arc 0->1 is incoming to 1
        h_input(&g, &x, 1, &idx.neighbors(1)[0], &mut buf);
        assert_eq!(buf, vec![1.0, 7.0, 0.0, 0.5, 2.0, 8.0]);
        h_input(&g, &x, 0, &idx.neighbors(0)[0], &mut buf);
        assert_eq!(buf, vec![2.0, 8.0, 0.5, 0.0, 1.0, 7.0]);
    }
}
