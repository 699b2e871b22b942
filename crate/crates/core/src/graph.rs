//! Graph representation, neighborhood index and batching utilities.

use crate::matrix::Matrix;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("arc {arc} ({from} -> {to}) has an endpoint outside 0..{num_nodes}")]
    ArcOutOfRange {
        arc: usize,
        from: usize,
        to: usize,
        num_nodes: usize,
    },
    #[error("arc {arc} is a self-loop on node {node}")]
    SelfLoop { arc: usize, node: usize },
    #[error("{what} has {got} rows, expected {expected}")]
    RowCount {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("supervised node {node} is out of range or duplicated")]
    BadSupervisedNode { node: usize },
    #[error("{targets} node targets for {nodes} supervised nodes")]
    TargetMismatch { nodes: usize, targets: usize },
    #[error("graph {index} has feature widths (m={m}, d={d}), expected (m={expected_m}, d={expected_d})")]
    DimensionMismatch {
        index: usize,
        m: usize,
        d: usize,
        expected_m: usize,
        expected_d: usize,
    },
    #[error("node {node} has degree {degree} > max_degree {max_degree}")]
    DegreeExceeds {
        node: usize,
        degree: usize,
        max_degree: usize,
    },
    #[error("disjoint union of zero graphs")]
    EmptyUnion,
}

/// A directed graph with node/arc features and optional supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    arcs: Vec<(usize, usize)>,
    node_features: Matrix,
    arc_features: Matrix,
    supervised_nodes: Vec<usize>,
    node_targets: Vec<usize>,
    graph_target: Option<usize>,
}

/// Validating constructor for [`Graph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    num_nodes: usize,
    arcs: Vec<(usize, usize)>,
    node_features: Matrix,
    arc_features: Option<Matrix>,
    supervised_nodes: Vec<usize>,
    node_targets: Vec<usize>,
    graph_target: Option<usize>,
    allow_self_loops: bool,
}

impl GraphBuilder {
    pub fn new(num_nodes: usize, arcs: Vec<(usize, usize)>, node_features: Matrix) -> Self {
        Self {
            num_nodes,
            arcs,
            node_features,
            arc_features: None,
            supervised_nodes: Vec::new(),
            node_targets: Vec::new(),
            graph_target: None,
            allow_self_loops: false,
        }
    }

    pub fn arc_features(mut self, features: Matrix) -> Self {
        self.arc_features = Some(features);
        self
    }

    /// Supervised nodes and their class targets, aligned pairwise.
    pub fn node_targets(mut self, nodes: Vec<usize>, targets: Vec<usize>) -> Self {
        self.supervised_nodes = nodes;
        self.node_targets = targets;
        self
    }

    pub fn graph_target(mut self, target: Option<usize>) -> Self {
        self.graph_target = target;
        self
    }

    pub fn allow_self_loops(mut self, allow: bool) -> Self {
        self.allow_self_loops = allow;
        self
    }

    pub fn build(self) -> Result<Graph, GraphError> {
        let n = self.num_nodes;
        for (i, &(u, v)) in self.arcs.iter().enumerate() {
            if u >= n || v >= n {
                return Err(GraphError::ArcOutOfRange {
                    arc: i,
                    from: u,
                    to: v,
                    num_nodes: n,
                });
            }
            if u == v && !self.allow_self_loops {
                return Err(GraphError::SelfLoop { arc: i, node: u });
            }
        }
        if self.node_features.rows() != n {
            return Err(GraphError::RowCount {
                what: "node feature matrix",
                got: self.node_features.rows(),
                expected: n,
            });
        }
        let arc_features = self
            .arc_features
            .unwrap_or_else(|| Matrix::zeros(self.arcs.len(), 0));
        if arc_features.rows() != self.arcs.len() {
            return Err(GraphError::RowCount {
                what: "arc feature matrix",
                got: arc_features.rows(),
                expected: self.arcs.len(),
            });
        }
        if self.supervised_nodes.len() != self.node_targets.len() {
            return Err(GraphError::TargetMismatch {
                nodes: self.supervised_nodes.len(),
                targets: self.node_targets.len(),
            });
        }
        let mut pairs: Vec<(usize, usize)> = self
            .supervised_nodes
            .into_iter()
            .zip(self.node_targets)
            .collect();
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GraphError::BadSupervisedNode { node: w[0].0 });
            }
        }
        if let Some(&(v, _)) = pairs.iter().find(|(v, _)| *v >= n) {
            return Err(GraphError::BadSupervisedNode { node: v });
        }
        let (supervised_nodes, node_targets) = pairs.into_iter().unzip();
        Ok(Graph {
            num_nodes: n,
            arcs: self.arcs,
            node_features: self.node_features,
            arc_features,
            supervised_nodes,
            node_targets,
            graph_target: self.graph_target,
        })
    }
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn node_features(&self) -> &Matrix {
        &self.node_features
    }

    pub fn arc_features(&self) -> &Matrix {
        &self.arc_features
    }

    /// Node feature width m.
    pub fn node_feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    /// Arc feature width d (may be 0).
    pub fn arc_feature_dim(&self) -> usize {
        self.arc_features.cols()
    }

    /// Sorted supervised node ids.
    pub fn supervised_nodes(&self) -> &[usize] {
        &self.supervised_nodes
    }

    /// Targets aligned with [`Graph::supervised_nodes`].
    pub fn node_targets(&self) -> &[usize] {
        &self.node_targets
    }

    pub fn graph_target(&self) -> Option<usize> {
        self.graph_target
    }

    /// Same topology with new node features.
    pub fn with_node_features(&self, features: Matrix) -> Result<Graph, GraphError> {
        GraphBuilder::new(self.num_nodes, self.arcs.clone(), features)
            .arc_features(self.arc_features.clone())
            .node_targets(self.supervised_nodes.clone(), self.node_targets.clone())
            .graph_target(self.graph_target)
            .allow_self_loops(true)
            .build()
    }

    /// Same graph with supervision replaced.
    pub fn with_node_targets(&self, nodes: Vec<usize>, targets: Vec<usize>) -> Result<Graph, GraphError> {
        GraphBuilder::new(self.num_nodes, self.arcs.clone(), self.node_features.clone())
            .arc_features(self.arc_features.clone())
            .node_targets(nodes, targets)
            .graph_target(self.graph_target)
            .allow_self_loops(true)
            .build()
    }

    /// Drops node-level supervision, keeping everything else.
    pub fn without_node_targets(&self) -> Graph {
        let mut g = self.clone();
        g.supervised_nodes.clear();
        g.node_targets.clear();
        g
    }

    /// Target of node `v`, if supervised.
    pub fn node_target(&self, v: usize) -> Option<usize> {
        self.supervised_nodes
            .binary_search(&v)
            .ok()
            .map(|i| self.node_targets[i])
    }
}

/// One neighbor `u` of a node `v`, with the arc ids realizing the relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub node: usize,
    /// Arc v -> u, present iff u is a child of v.
    pub arc_out: Option<usize>,
    /// Arc u -> v, present iff u is a parent of v.
    pub arc_in: Option<usize>,
}

/// Parent, child and neighbor lists in compressed form, plus the reverse index
/// `{w : v in ne[w]}` addressed by entry id.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    entries: Vec<NeighborEntry>,
    reverse_offsets: Vec<usize>,
    /// (owner w, entry id in ne[w]) pairs, sorted by w within each node.
    reverse: Vec<(usize, usize)>,
}

impl NeighborIndex {
    pub fn build(g: &Graph) -> Self {
        let n = g.num_nodes();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        // per-node map neighbor -> (arc_out, arc_in), kept sorted
        let mut ne: Vec<Vec<NeighborEntry>> = vec![Vec::new(); n];
        for (a, &(u, v)) in g.arcs().iter().enumerate() {
            children[u].push(v);
            parents[v].push(u);
            upsert(&mut ne[u], v, |e| {
                e.arc_out.get_or_insert(a);
            });
            upsert(&mut ne[v], u, |e| {
                e.arc_in.get_or_insert(a);
            });
        }
        for l in parents.iter_mut().chain(children.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut entries = Vec::new();
        for list in ne {
            entries.extend(list);
            offsets.push(entries.len());
        }

        let mut counts = vec![0usize; n];
        for e in &entries {
            counts[e.node] += 1;
        }
        let mut reverse_offsets = Vec::with_capacity(n + 1);
        reverse_offsets.push(0);
        for c in &counts {
            reverse_offsets.push(reverse_offsets.last().unwrap() + c);
        }
        let mut cursor = reverse_offsets[..n].to_vec();
        let mut reverse = vec![(0, 0); entries.len()];
        // owners visited in ascending order, so each bucket ends up sorted by w
        for w in 0..n {
            for e in offsets[w]..offsets[w + 1] {
                let v = entries[e].node;
                reverse[cursor[v]] = (w, e);
                cursor[v] += 1;
            }
        }
        Self {
            parents,
            children,
            offsets,
            entries,
            reverse_offsets,
            reverse,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// ne[v] in ascending node order.
    pub fn neighbors(&self, v: usize) -> &[NeighborEntry] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Entry ids of ne[v] (positions in the flat entry table).
    pub fn entry_range(&self, v: usize) -> Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn neighbor_ids(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors(v).iter().map(|e| e.node)
    }

    /// de[v] = |ne[v]|.
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    /// Entry ids whose owner w has v in ne[w], as (w, entry id).
    pub fn reverse(&self, v: usize) -> &[(usize, usize)] {
        &self.reverse[self.reverse_offsets[v]..self.reverse_offsets[v + 1]]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes()).map(|v| self.degree(v)).max().unwrap_or(0)
    }
}

fn upsert(list: &mut Vec<NeighborEntry>, node: usize, f: impl FnOnce(&mut NeighborEntry)) {
    let pos = match list.binary_search_by_key(&node, |e| e.node) {
        Ok(p) => p,
        Err(p) => {
            list.insert(
                p,
                NeighborEntry {
                    node,
                    arc_out: None,
                    arc_in: None,
                },
            );
            p
        }
    };
    f(&mut list[pos]);
}

/// Several graphs merged as disconnected components of one graph.
#[derive(Debug, Clone)]
pub struct DisjointUnion {
    pub graph: Graph,
    /// Node offset of each component; component `i` spans `offsets[i]..offsets[i+1]`
    /// (the last one ends at `graph.num_nodes()`).
    pub offsets: Vec<usize>,
    pub arc_offsets: Vec<usize>,
    pub graph_targets: Vec<Option<usize>>,
}

impl DisjointUnion {
    pub fn num_components(&self) -> usize {
        self.offsets.len()
    }

    pub fn component(&self, i: usize) -> Range<usize> {
        let end = self
            .offsets
            .get(i + 1)
            .copied()
            .unwrap_or(self.graph.num_nodes());
        self.offsets[i]..end
    }

    pub fn components(&self) -> Vec<Range<usize>> {
        (0..self.num_components()).map(|i| self.component(i)).collect()
    }

    /// Recovers component `i` as a standalone graph.
    pub fn extract(&self, i: usize) -> Graph {
        let nodes = self.component(i);
        let arc_end = self
            .arc_offsets
            .get(i + 1)
            .copied()
            .unwrap_or(self.graph.num_arcs());
        let arcs = self.arc_offsets[i]..arc_end;
        let base = nodes.start;
        let local_arcs = self.graph.arcs()[arcs.clone()]
            .iter()
            .map(|&(u, v)| (u - base, v - base))
            .collect();
        let (sup, tgt): (Vec<usize>, Vec<usize>) = self
            .graph
            .supervised_nodes()
            .iter()
            .zip(self.graph.node_targets())
            .filter(|(v, _)| nodes.contains(v))
            .map(|(v, t)| (v - base, *t))
            .unzip();
        GraphBuilder::new(
            nodes.len(),
            local_arcs,
            self.graph.node_features().slice_rows(nodes.start, nodes.end),
        )
        .arc_features(self.graph.arc_features().slice_rows(arcs.start, arcs.end))
        .node_targets(sup, tgt)
        .graph_target(self.graph_targets[i])
        .allow_self_loops(true)
        .build()
        .expect("component of a valid union is valid")
    }
}

/// Merges graphs into one graph whose components are the inputs, in order.
pub fn disjoint_union(graphs: &[Graph]) -> Result<DisjointUnion, GraphError> {
    let first = graphs.first().ok_or(GraphError::EmptyUnion)?;
    let (m, d) = (first.node_feature_dim(), first.arc_feature_dim());
    let mut offsets = Vec::with_capacity(graphs.len());
    let mut arc_offsets = Vec::with_capacity(graphs.len());
    let mut arcs = Vec::new();
    let mut sup = Vec::new();
    let mut tgt = Vec::new();
    let mut base = 0;
    for (i, g) in graphs.iter().enumerate() {
        if g.node_feature_dim() != m || g.arc_feature_dim() != d {
            return Err(GraphError::DimensionMismatch {
                index: i,
                m: g.node_feature_dim(),
                d: g.arc_feature_dim(),
                expected_m: m,
                expected_d: d,
            });
        }
        offsets.push(base);
        arc_offsets.push(arcs.len());
        arcs.extend(g.arcs().iter().map(|&(u, v)| (u + base, v + base)));
        sup.extend(g.supervised_nodes().iter().map(|v| v + base));
        tgt.extend_from_slice(g.node_targets());
        base += g.num_nodes();
    }
    let node_features = Matrix::vstack(m, graphs.iter().map(|g| g.node_features()));
    let arc_features = Matrix::vstack(d, graphs.iter().map(|g| g.arc_features()));
    let graph = GraphBuilder::new(base, arcs, node_features)
        .arc_features(arc_features)
        .node_targets(sup, tgt)
        .allow_self_loops(true)
        .build()?;
    Ok(DisjointUnion {
        graph,
        offsets,
        arc_offsets,
        graph_targets: graphs.iter().map(|g| g.graph_target()).collect(),
    })
}

/// One-hot encoding of de[v] with width `max_degree + 1`.
pub fn degree_one_hot_features(g: &Graph, max_degree: usize) -> Result<Matrix, GraphError> {
    let idx = NeighborIndex::build(g);
    let mut out = Matrix::zeros(g.num_nodes(), max_degree + 1);
    for v in 0..g.num_nodes() {
        let degree = idx.degree(v);
        if degree > max_degree {
            return Err(GraphError::DegreeExceeds {
                node: v,
                degree,
                max_degree,
            });
        }
        out.row_mut(v)[degree] = 1.0;
    }
    Ok(out)
}

/// Adds both directions for each undirected edge.
pub fn symmetric_arcs(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect()
}
