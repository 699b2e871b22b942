//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lpgnn_core::datasets::{LabeledDataset, Provenance};
use lpgnn_core::{ConstraintVariant, Graph};
use std::collections::HashSet;

pub fn edges(g: &Graph) -> HashSet<(usize, usize)> {
    g.arcs().iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect()
}

pub fn tags(g: &Graph) -> Vec<usize> {
    g.node_features()
        .iter_rows()
        .map(|r| r.iter().position(|&x| x == 1.0).unwrap())
        .collect()
}

/// All ordered selections of `k` distinct items from `0..n`.
pub fn arrangements(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..n)
                    .filter(|v| !prefix.contains(v))
                    .map(|v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

/// 1000 evenly spaced points on [-2, 2], both ends included.
pub fn grid() -> Vec<f64> {
    (0..1000).map(|i| -2.0 + 4.0 * i as f64 / 999.0).collect()
}

pub fn closed_form(v: ConstraintVariant, eps: f64, r: f64) -> (f64, f64) {
    match v {
        ConstraintVariant::Lin => (r, 1.0),
        ConstraintVariant::LinEps if r > eps => (r - eps, 1.0),
        ConstraintVariant::LinEps if r < -eps => (r + eps, 1.0),
        ConstraintVariant::LinEps => (0.0, 0.0),
        ConstraintVariant::Abs if r > 0.0 => (r, 1.0),
        ConstraintVariant::Abs if r < 0.0 => (-r, -1.0),
        ConstraintVariant::Abs => (0.0, 0.0),
        ConstraintVariant::AbsEps if r > eps => (r - eps, 1.0),
        ConstraintVariant::AbsEps if r < -eps => (-r - eps, -1.0),
        ConstraintVariant::AbsEps => (0.0, 0.0),
        ConstraintVariant::Squared => (r * r, 2.0 * r),
    }
}

/// Node labels of a generated subgraph-matching dataset recomputed by
/// trying every ordered placement of the recorded pattern.
pub fn subgraph_labels(ds: &LabeledDataset) -> Vec<Vec<usize>> {
    let Provenance::Generated { params, .. } = &ds.provenance else {
        panic!("generated dataset without generator provenance");
    };
    let p_edges: Vec<(usize, usize)> = serde_json::from_value(params["pattern"]["edges"].clone()).unwrap();
    let p_tags: Vec<usize> = serde_json::from_value(params["pattern"]["tags"].clone()).unwrap();
    ds.graphs
        .iter()
        .map(|g| {
            let e = edges(g);
            let t = tags(g);
            let mut label = vec![0; g.num_nodes()];
            for a in arrangements(g.num_nodes(), p_tags.len()) {
                let tags_ok = a.iter().zip(&p_tags).all(|(&v, &pt)| t[v] == pt);
                if tags_ok && p_edges.iter().all(|&(i, j)| e.contains(&(a[i], a[j]))) {
                    for &v in &a {
                        label[v] = 1;
                    }
                }
            }
            label
        })
        .collect()
}

/// Membership in some `k`-clique, by checking every `k`-subset. `None` when a
/// larger clique exists.
pub fn clique_labels(g: &Graph, k: usize) -> Option<Vec<usize>> {
    let e = edges(g);
    let n = g.num_nodes();
    let is_clique = |s: &[usize]| s.iter().all(|&a| s.iter().all(|&b| a == b || e.contains(&(a, b))));
    if subsets(n, k + 1).iter().any(|s| is_clique(s)) {
        return None;
    }
    let mut label = vec![0; n];
    for s in subsets(n, k).iter().filter(|s| is_clique(s)) {
        for &v in s {
            label[v] = 1;
        }
    }
    Some(label)
}
