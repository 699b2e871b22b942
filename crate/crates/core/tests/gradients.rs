//! Analytic Lagrangian gradients against central finite differences of an
//! independent scalar implementation.

use lpgnn_core::lp::{gradients, lagrangian_value, GradientOptions};
use lpgnn_core::nn::Activation;
use lpgnn_core::{
    Aggregation, ConstraintFunction, ConstraintVariant, Execution, Graph, GraphBatch, GraphBuilder, LpGnnModel,
    Matrix, ModelSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPSILON: f64 = 0.1;

fn mlp(widths: &[usize], params: &[f64], output: Activation, input: &[f64]) -> Vec<f64> {
    let mut a = input.to_vec();
    let mut off = 0;
    for l in 0..widths.len() - 1 {
        let (fi, fo) = (widths[l], widths[l + 1]);
        let w = &params[off..off + fi * fo];
        let b = &params[off + fi * fo..off + fi * fo + fo];
        off += fi * fo + fo;
        let last = l == widths.len() - 2;
        a = (0..fo)
            .map(|o| {
                let z = b[o] + (0..fi).map(|i| w[o * fi + i] * a[i]).sum::<f64>();
                if !last || output == Activation::Tanh {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect();
    }
    a
}

fn g(variant: ConstraintVariant, r: f64) -> f64 {
    match variant {
        ConstraintVariant::Lin => r,
        ConstraintVariant::LinEps => {
            if r > EPSILON {
                r - EPSILON
            } else if r < -EPSILON {
                r + EPSILON
            } else {
                0.0
            }
        }
        ConstraintVariant::Abs => r.abs(),
        ConstraintVariant::AbsEps => (r.abs() - EPSILON).max(0.0),
        ConstraintVariant::Squared => r * r,
    }
}

fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let sum: f64 = logits.iter().map(|z| z.exp()).sum();
    sum.ln() - logits[y]
}

struct Problem {
    graph: Graph,
    nodes: Vec<usize>,
    targets: Vec<usize>,
    components: Vec<(usize, usize, usize)>,
}

/// Neighbor list of v from the raw arc list: (u, arc v->u, arc u->v), sorted by u.
fn neighbors(graph: &Graph, v: usize) -> Vec<(usize, Option<usize>, Option<usize>)> {
    let mut out: Vec<(usize, Option<usize>, Option<usize>)> = Vec::new();
    for (a, &(p, c)) in graph.arcs().iter().enumerate() {
        for (me, other, outgoing) in [(p, c, true), (c, p, false)] {
            if me != v {
                continue;
            }
            let pos = match out.iter().position(|e| e.0 == other) {
                Some(i) => i,
                None => {
                    out.push((other, None, None));
                    out.len() - 1
                }
            };
            if outgoing {
                out[pos].1.get_or_insert(a);
            } else {
                out[pos].2.get_or_insert(a);
            }
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

fn oracle_lagrangian(
    model: &LpGnnModel,
    p: &Problem,
    theta_h: &[f64],
    theta_r: &[f64],
    x: &Matrix,
    lambda: &Matrix,
) -> f64 {
    let gr = &p.graph;
    let s = model.state_dim();
    let d = gr.arc_feature_dim();
    let arc = |a: Option<usize>| a.map_or(vec![0.0; d], |a| gr.arc_features().row(a).to_vec());
    let mut total = 0.0;
    for v in 0..gr.num_nodes() {
        let ne = neighbors(gr, v);
        let mut fa = vec![0.0; s];
        for &(u, out, inc) in &ne {
            let mut input = x.row(u).to_vec();
            input.extend_from_slice(gr.node_features().row(u));
            input.extend(arc(out));
            input.extend(arc(inc));
            input.extend_from_slice(x.row(v));
            input.extend_from_slice(gr.node_features().row(v));
            let h = mlp(model.h_net.widths(), theta_h, Activation::Tanh, &input);
            for k in 0..s {
                fa[k] += h[k];
            }
        }
        if model.aggregation == Aggregation::Avg && !ne.is_empty() {
            for f in &mut fa {
                *f /= ne.len() as f64;
            }
        }
        for k in 0..s {
            total += lambda.row(v)[k] * g(model.constraint.variant, x.row(v)[k] - fa[k]);
        }
    }
    let readout = |input: &[f64]| mlp(model.readout.widths(), theta_r, Activation::Identity, input);
    for (&v, &y) in p.nodes.iter().zip(&p.targets) {
        total += cross_entropy(&readout(x.row(v)), y);
    }
    for &(start, end, y) in &p.components {
        let mut mean = vec![0.0; s];
        for v in start..end {
            for k in 0..s {
                mean[k] += x.row(v)[k] / (end - start) as f64;
            }
        }
        total += cross_entropy(&readout(&mean), y);
    }
    total
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, m: usize, d: usize) -> (Vec<(usize, usize)>, Matrix, Matrix) {
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            // node n-1 stays isolated
            if u != v && u < n - 1 && v < n - 1 && rng.random_bool(0.3) {
                arcs.push((u, v));
            }
        }
    }
    let feats = Matrix::from_vec(n, m, (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect());
    let arc_feats = Matrix::from_vec(
        arcs.len(),
        d,
        (0..arcs.len() * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    (arcs, feats, arc_feats)
}

fn node_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (arcs, feats, arc_feats) = random_graph(&mut rng, 7, 3, 2);
    let nodes = vec![0, 2, 3, 6];
    let targets = vec![1, 0, 1, 0];
    let graph = GraphBuilder::new(7, arcs, feats)
        .arc_features(arc_feats)
        .node_targets(nodes.clone(), targets.clone())
        .build()
        .unwrap();
    Problem {
        graph,
        nodes,
        targets,
        components: vec![],
    }
}

fn graph_problem(seed: u64) -> (Problem, GraphBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::new();
    for (n, y) in [(5, 1), (4, 0)] {
        let (arcs, feats, arc_feats) = random_graph(&mut rng, n, 3, 2);
        graphs.push(
            GraphBuilder::new(n, arcs, feats)
                .arc_features(arc_feats)
                .graph_target(Some(y))
                .build()
                .unwrap(),
        );
    }
    let batch = GraphBatch::graph_task(&graphs).unwrap();
    let p = Problem {
        graph: batch.graph.clone(),
        nodes: vec![],
        targets: vec![],
        components: vec![(0, 5, 1), (5, 9, 0)],
    };
    (p, batch)
}

fn model(variant: ConstraintVariant, aggregation: Aggregation, seed: u64) -> LpGnnModel {
    let spec = ModelSpec {
        state_dim: 3,
        node_feature_dim: 3,
        arc_feature_dim: 2,
        num_classes: 2,
        hidden_units: 4,
        hidden_layers: 1,
        dropout: 0.0,
        aggregation,
        constraint: ConstraintFunction::new(variant, EPSILON),
    };
    LpGnnModel::new(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, s: usize, scale: f64) -> Matrix {
    Matrix::from_vec(n, s, (0..n * s).map(|_| rng.random_range(-scale..scale)).collect())
}

fn near_kink(model: &LpGnnModel, batch: &GraphBatch, x: &Matrix) -> bool {
    let r = lpgnn_core::lp::residuals(model, &batch.graph, &batch.index, x, Execution::Sequential).unwrap();
    let kinks = model.constraint.kinks();
    r.as_slice().iter().any(|&ri| kinks.iter().any(|&k| (ri - k).abs() < 1e-3))
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let tol = 1e-6 + 1e-5 * numeric.abs().max(analytic.abs());
    assert!(
        (analytic - numeric).abs() <= tol,
        "{what}: analytic {analytic} vs numeric {numeric}"
    );
}

fn check(model: &LpGnnModel, p: &Problem, batch: &GraphBatch, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch.num_nodes();
    let s = model.state_dim();
    let (x, lambda) = loop {
        let x = random_matrix(&mut rng, n, s, 1.0);
        if !near_kink(model, batch, &x) {
            break (x, random_matrix(&mut rng, n, s, 2.0));
        }
    };
    let th = model.h_net.params().to_vec();
    let tr = model.readout.params().to_vec();
    let f = |th: &[f64], tr: &[f64], x: &Matrix, l: &Matrix| oracle_lagrangian(model, p, th, tr, x, l);

    let value = lagrangian_value(model, batch, &x, &lambda).unwrap();
    assert_close(value, f(&th, &tr, &x, &lambda), "value");

    let grads = gradients(model, batch, &x, &lambda, &GradientOptions::default()).unwrap();
    assert_close(grads.terms.value(), value, "terms");
    let step = 1e-6;
    for i in 0..n * s {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.as_mut_slice()[i] += step;
        xm.as_mut_slice()[i] -= step;
        let num = (f(&th, &tr, &xp, &lambda) - f(&th, &tr, &xm, &lambda)) / (2.0 * step);
        assert_close(grads.dx.as_slice()[i], num, &format!("dx[{i}]"));

        let (mut lp, mut lm) = (lambda.clone(), lambda.clone());
        lp.as_mut_slice()[i] += step;
        lm.as_mut_slice()[i] -= step;
        let num = (f(&th, &tr, &x, &lp) - f(&th, &tr, &x, &lm)) / (2.0 * step);
        assert_close(grads.dlambda.as_slice()[i], num, &format!("dlambda[{i}]"));
    }
    for i in 0..th.len() {
        let (mut p_, mut m_) = (th.clone(), th.clone());
        p_[i] += step;
        m_[i] -= step;
        let num = (f(&p_, &tr, &x, &lambda) - f(&m_, &tr, &x, &lambda)) / (2.0 * step);
        assert_close(grads.dtheta_h[i], num, &format!("dtheta_h[{i}]"));
    }
    for i in 0..tr.len() {
        let (mut p_, mut m_) = (tr.clone(), tr.clone());
        p_[i] += step;
        m_[i] -= step;
        let num = (f(&th, &p_, &x, &lambda) - f(&th, &m_, &x, &lambda)) / (2.0 * step);
        assert_close(grads.dtheta_r[i], num, &format!("dtheta_r[{i}]"));
    }
}

#[test]
fn node_task_all_variants_and_aggregations() {
    for (vi, &variant) in ConstraintVariant::ALL.iter().enumerate() {
        for (ai, aggregation) in [Aggregation::Sum, Aggregation::Avg].into_iter().enumerate() {
            let seed = (vi * 2 + ai) as u64;
            let m = model(variant, aggregation, seed);
            let p = node_problem(seed + 100);
            let batch = GraphBatch::node_task(p.graph.clone());
            check(&m, &p, &batch, seed + 200);
        }
    }
}

#[test]
fn graph_task_all_variants_and_aggregations() {
    for (vi, &variant) in ConstraintVariant::ALL.iter().enumerate() {
        for (ai, aggregation) in [Aggregation::Sum, Aggregation::Avg].into_iter().enumerate() {
            let seed = (vi * 2 + ai) as u64 + 50;
            let m = model(variant, aggregation, seed);
            let (p, batch) = graph_problem(seed + 100);
            check(&m, &p, &batch, seed + 200);
        }
    }
}

#[test]
fn self_loop_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let feats = random_matrix(&mut rng, 3, 3, 1.0);
    let arc_feats = random_matrix(&mut rng, 3, 2, 1.0);
    let graph = GraphBuilder::new(3, vec![(0, 0), (0, 1), (2, 1)], feats)
        .arc_features(arc_feats)
        .node_targets(vec![1], vec![1])
        .allow_self_loops(true)
        .build()
        .unwrap();
    let p = Problem {
        graph: graph.clone(),
        nodes: vec![1],
        targets: vec![1],
        components: vec![],
    };
    let m = model(ConstraintVariant::Squared, Aggregation::Avg, 4);
    check(&m, &p, &GraphBatch::node_task(graph), 5);
}

#[test]
fn frozen_weight_gradients_match_full() {
    let m = model(ConstraintVariant::Abs, Aggregation::Sum, 1);
    let p = node_problem(3);
    let batch = GraphBatch::node_task(p.graph.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_matrix(&mut rng, 7, 3, 1.0);
    let lambda = random_matrix(&mut rng, 7, 3, 1.0);
    let full = gradients(&m, &batch, &x, &lambda, &GradientOptions::default()).unwrap();
    let frozen = gradients(
        &m,
        &batch,
        &x,
        &lambda,
        &GradientOptions {
            weights: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(full.dx, frozen.dx);
    assert_eq!(full.dlambda, frozen.dlambda);
    assert!(frozen.dtheta_h.is_empty() && frozen.dtheta_r.is_empty());
}
