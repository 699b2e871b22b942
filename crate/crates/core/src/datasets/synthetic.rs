//! Synthetic node-classification tasks on small random graphs.
//!
//! Graphs are undirected (stored as symmetric arc pairs) with at most 64
//! nodes so adjacency fits in one `u64` row per node. Labels are computed by
//! exhaustive backtracking search, independent of the planting step.

use super::{DatasetError, LabeledDataset, Provenance, TaskKind};
use crate::graph::{symmetric_arcs, Graph, GraphBuilder};
use crate::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphParams {
    pub n_graphs: usize,
    pub graph_size: usize,
    pub subgraph_size: usize,
    pub edge_prob: f64,
    pub num_tags: usize,
    pub seed: u64,
}

impl Default for SubgraphParams {
    fn default() -> Self {
        Self {
            n_graphs: 100,
            graph_size: 7,
            subgraph_size: 3,
            edge_prob: 0.2,
            num_tags: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueParams {
    pub n_graphs: usize,
    pub graph_size: usize,
    pub clique_size: usize,
    pub edge_prob: f64,
    pub num_tags: usize,
    pub seed: u64,
    /// Draws allowed per graph before giving up.
    pub max_attempts: usize,
}

impl Default for CliqueParams {
    fn default() -> Self {
        Self {
            n_graphs: 100,
            graph_size: 7,
            clique_size: 3,
            edge_prob: 0.2,
            num_tags: 10,
            seed: 0,
            max_attempts: 1000,
        }
    }
}

/// A connected, tagged target pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub edges: Vec<(usize, usize)>,
    pub tags: Vec<usize>,
}

impl Pattern {
    pub fn size(&self) -> usize {
        self.tags.len()
    }

    /// Random connected pattern: a random spanning tree plus each remaining
    /// pair with probability 1/2.
    pub fn random<R: Rng + ?Sized>(size: usize, num_tags: usize, rng: &mut R) -> Result<Self, DatasetError> {
        if size < 2 {
            return Err(DatasetError::InvalidParams(format!(
                "a pattern of {size} node(s) has no arcs"
            )));
        }
        let mut adj = vec![0u64; size];
        for i in 1..size {
            let j = rng.random_range(0..i);
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        for i in 0..size {
            for j in i + 1..size {
                if adj[i] >> j & 1 == 0 && rng.random_bool(0.5) {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        let tags = (0..size).map(|_| rng.random_range(0..num_tags)).collect();
        Ok(Self {
            edges: edges_of(&adj),
            tags,
        })
    }

    fn adjacency(&self) -> Vec<u64> {
        adjacency(self.size(), &self.edges)
    }
}

pub(crate) fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<u64> {
    let mut adj = vec![0u64; n];
    for &(u, v) in edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    adj
}

fn edges_of(adj: &[u64]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, row) in adj.iter().enumerate() {
        for j in i + 1..adj.len() {
            if row >> j & 1 == 1 {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Nodes (as a bitmask) covered by at least one tag-preserving embedding of
/// `pattern` into the graph. Pattern edges must map onto graph edges; extra
/// graph edges among the image nodes are allowed.
pub fn pattern_members(adj: &[u64], tags: &[usize], pattern: &Pattern) -> u64 {
    let p_adj = pattern.adjacency();
    let k = pattern.size();
    let mut assignment = vec![0usize; k];
    let mut covered = 0u64;
    fn extend(
        depth: usize,
        used: u64,
        assignment: &mut [usize],
        adj: &[u64],
        tags: &[usize],
        p_adj: &[u64],
        p_tags: &[usize],
        covered: &mut u64,
    ) {
        if depth == p_tags.len() {
            for &v in assignment.iter() {
                *covered |= 1 << v;
            }
            return;
        }
        for v in 0..adj.len() {
            if used >> v & 1 == 1 || tags[v] != p_tags[depth] {
                continue;
            }
            let consistent = (0..depth).all(|q| p_adj[depth] >> q & 1 == 0 || adj[v] >> assignment[q] & 1 == 1);
            if consistent {
                assignment[depth] = v;
                extend(depth + 1, used | 1 << v, assignment, adj, tags, p_adj, p_tags, covered);
            }
        }
    }
    extend(0, 0, &mut assignment, adj, tags, &p_adj, &pattern.tags, &mut covered);
    covered
}

/// Size of the largest clique (Bron-Kerbosch with pivoting).
pub fn max_clique_size(adj: &[u64]) -> usize {
    fn bk(r: usize, p: u64, x: u64, adj: &[u64], best: &mut usize) {
        if p == 0 && x == 0 {
            *best = (*best).max(r);
            return;
        }
        if r + (p.count_ones() as usize) <= *best {
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let mut candidates = p & !adj[pivot];
        let (mut p, mut x) = (p, x);
        while candidates != 0 {
            let v = candidates.trailing_zeros() as usize;
            candidates &= candidates - 1;
            bk(r + 1, p & adj[v], x & adj[v], adj, best);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }
    let n = adj.len();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = 0;
    bk(0, all, 0, adj, &mut best);
    best
}

/// Nodes (as a bitmask) that lie in some clique of exactly `k` nodes.
pub fn clique_members(adj: &[u64], k: usize) -> u64 {
    fn grow(start: usize, members: u64, size: usize, common: u64, k: usize, adj: &[u64], covered: &mut u64) {
        if size == k {
            *covered |= members;
            return;
        }
        for v in start..adj.len() {
            if common >> v & 1 == 1 {
                grow(v + 1, members | 1 << v, size + 1, common & adj[v], k, adj, covered);
            }
        }
    }
    let n = adj.len();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut covered = 0;
    if k > 0 {
        grow(0, 0, 0, all, k, adj, &mut covered);
    }
    covered
}

fn one_hot_tags(tags: &[usize], num_tags: usize) -> Matrix {
    let mut m = Matrix::zeros(tags.len(), num_tags);
    for (v, &t) in tags.iter().enumerate() {
        m.row_mut(v)[t] = 1.0;
    }
    m
}

fn labeled_graph(adj: &[u64], tags: &[usize], num_tags: usize, members: u64) -> Result<Graph, DatasetError> {
    let n = adj.len();
    let targets = (0..n).map(|v| (members >> v & 1) as usize).collect();
    Ok(GraphBuilder::new(n, symmetric_arcs(&edges_of(adj)), one_hot_tags(tags, num_tags))
        .node_targets((0..n).collect(), targets)
        .build()?)
}

fn random_placement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    nodes.truncate(k);
    nodes
}

fn add_random_edges<R: Rng + ?Sized>(adj: &mut [u64], p: f64, rng: &mut R) {
    let n = adj.len();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
}

fn check_common(graph_size: usize, part: usize, edge_prob: f64, num_tags: usize) -> Result<(), DatasetError> {
    if graph_size == 0 || graph_size > 64 {
        return Err(DatasetError::InvalidParams(format!(
            "graph_size must be in 1..=64, got {graph_size}"
        )));
    }
    if part > graph_size {
        return Err(DatasetError::InvalidParams(format!(
            "planted size {part} exceeds graph size {graph_size}"
        )));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(DatasetError::InvalidParams(format!("edge_prob {edge_prob} outside [0, 1]")));
    }
    if num_tags == 0 {
        return Err(DatasetError::InvalidParams("num_tags must be positive".into()));
    }
    Ok(())
}

/// Random graphs with one planted copy of a random tagged pattern; node label
/// is 1 iff the node belongs to some embedding of the pattern.
pub fn generate_subgraph_matching(params: &SubgraphParams) -> Result<LabeledDataset, DatasetError> {
    check_common(params.graph_size, params.subgraph_size, params.edge_prob, params.num_tags)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pattern = Pattern::random(params.subgraph_size, params.num_tags, &mut rng)?;
    let n = params.graph_size;
    let mut graphs = Vec::with_capacity(params.n_graphs);
    for _ in 0..params.n_graphs {
        let mut tags: Vec<usize> = (0..n).map(|_| rng.random_range(0..params.num_tags)).collect();
        let place = random_placement(n, pattern.size(), &mut rng);
        let mut adj = vec![0u64; n];
        for (p, &v) in place.iter().enumerate() {
            tags[v] = pattern.tags[p];
        }
        for &(a, b) in &pattern.edges {
            adj[place[a]] |= 1 << place[b];
            adj[place[b]] |= 1 << place[a];
        }
        add_random_edges(&mut adj, params.edge_prob, &mut rng);
        let members = pattern_members(&adj, &tags, &pattern);
        graphs.push(labeled_graph(&adj, &tags, params.num_tags, members)?);
    }
    Ok(LabeledDataset {
        graphs,
        task: TaskKind::NodeBinary,
        num_classes: 2,
        provenance: Provenance::Generated {
            generator: "subgraph-matching".into(),
            seed: params.seed,
            params: serde_json::json!({ "params": params, "pattern": pattern }),
        },
    })
}

/// Random graphs with a planted clique whose maximum clique is exactly
/// `clique_size`; node label is 1 iff the node lies in such a clique.
pub fn generate_clique(params: &CliqueParams) -> Result<LabeledDataset, DatasetError> {
    check_common(params.graph_size, params.clique_size, params.edge_prob, params.num_tags)?;
    if params.clique_size < 2 {
        return Err(DatasetError::InvalidParams("clique_size must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.graph_size;
    let k = params.clique_size;
    let mut graphs = Vec::with_capacity(params.n_graphs);
    for gi in 0..params.n_graphs {
        let mut accepted = None;
        for _ in 0..params.max_attempts {
            let place = random_placement(n, k, &mut rng);
            let mut adj = vec![0u64; n];
            for (i, &a) in place.iter().enumerate() {
                for &b in &place[i + 1..] {
                    adj[a] |= 1 << b;
                    adj[b] |= 1 << a;
                }
            }
            add_random_edges(&mut adj, params.edge_prob, &mut rng);
            if max_clique_size(&adj) == k {
                accepted = Some(adj);
                break;
            }
        }
        let adj = accepted.ok_or(DatasetError::ResamplingExhausted {
            graph: gi,
            attempts: params.max_attempts,
        })?;
        let tags: Vec<usize> = (0..n).map(|_| rng.random_range(0..params.num_tags)).collect();
        let members = clique_members(&adj, k);
        graphs.push(labeled_graph(&adj, &tags, params.num_tags, members)?);
    }
    Ok(LabeledDataset {
        graphs,
        task: TaskKind::NodeBinary,
        num_classes: 2,
        provenance: Provenance::Generated {
            generator: "clique".into(),
            seed: params.seed,
            params: serde_json::to_value(params)?,
        },
    })
}
