//! Lagrangian value and its gradients with respect to the transition weights,
//! readout weights, node states and multipliers.
//!
//! `L = sum_{v in S} CE(f_r(x_v), y_v) + sum_{v in V} lambda_v . G(x_v - f_{a,v})`
//!
//! Every per-node quantity depends only on 1-hop neighbor data, so the work is
//! split over node chunks (see [`crate::exec`]).

use super::model::{h_input, GraphBatch, LpGnnModel, Supervision};
use super::LpError;
use crate::exec::{Execution, CHUNK};
use crate::graph::{Graph, NeighborIndex};
use crate::matrix::Matrix;
use crate::nn::{DropoutMask, ForwardCache};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Softmax cross-entropy of `logits` against class `target`, and its gradient.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[target];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == target { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Source of dropout masks during training. Masks are a pure function of
/// (seed, node), so chunked evaluation stays reproducible.
#[derive(Debug, Clone, Copy)]
pub struct DropoutStream {
    pub seed: u64,
}

const READOUT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl DropoutStream {
    fn node_rng(&self, node: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ splitmix(node as u64)))
    }

    fn readout_rng(&self, item: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ READOUT_SALT ^ splitmix(item as u64 + 1)))
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// f_{a,v} and the per-neighbor caches needed to differentiate it.
pub fn transition_forward(
    model: &LpGnnModel,
    g: &Graph,
    idx: &NeighborIndex,
    x: &Matrix,
    v: usize,
) -> Result<(Vec<f64>, Vec<ForwardCache>), LpError> {
    transition_forward_masked(model, g, idx, x, v, None)
}

fn transition_forward_masked(
    model: &LpGnnModel,
    g: &Graph,
    idx: &NeighborIndex,
    x: &Matrix,
    v: usize,
    dropout: Option<&DropoutStream>,
) -> Result<(Vec<f64>, Vec<ForwardCache>), LpError> {
    if v >= g.num_nodes() {
        return Err(LpError::Shape(format!("node {v} out of range")));
    }
    let s = model.state_dim();
    let neighbors = idx.neighbors(v);
    let weight = model.aggregation.weight(neighbors.len());
    let mut fa = vec![0.0; s];
    let mut caches = Vec::with_capacity(neighbors.len());
    let mut input = Vec::with_capacity(model.h_net.input_width());
    let mut rng = dropout
        .filter(|_| model.h_net.dropout() > 0.0)
        .map(|d| d.node_rng(v));
    for entry in neighbors {
        h_input(g, x, v, entry, &mut input);
        let mask = rng.as_mut().map(|r| DropoutMask::sample(&model.h_net, r));
        let (out, cache) = model.h_net.forward(&input, mask.as_ref())?;
        for (f, o) in fa.iter_mut().zip(&out) {
            *f += o;
        }
        caches.push(cache);
    }
    if weight != 1.0 {
        for f in &mut fa {
            *f *= weight;
        }
    }
    Ok((fa, caches))
}

/// f_{a,v} for every node.
pub fn transition_all(
    model: &LpGnnModel,
    g: &Graph,
    idx: &NeighborIndex,
    x: &Matrix,
    exec: Execution,
) -> Result<Matrix, LpError> {
    let s = model.state_dim();
    let parts = exec.map_chunks(g.num_nodes(), CHUNK, |range| -> Result<Vec<f64>, LpError> {
        let mut rows = Vec::with_capacity(range.len() * s);
        for v in range {
            rows.extend(transition_forward(model, g, idx, x, v)?.0);
        }
        Ok(rows)
    });
    let mut data = Vec::with_capacity(g.num_nodes() * s);
    for p in parts {
        data.extend(p?);
    }
    Ok(Matrix::from_vec(g.num_nodes(), s, data))
}

/// Residuals `x_v - f_{a,v}` for every node.
pub fn residuals(
    model: &LpGnnModel,
    g: &Graph,
    idx: &NeighborIndex,
    x: &Matrix,
    exec: Execution,
) -> Result<Matrix, LpError> {
    let mut fa = transition_all(model, g, idx, x, exec)?;
    for (f, xv) in fa.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *f = xv - *f;
    }
    Ok(fa)
}

/// Node-focused readout f_r(x_v).
pub fn readout_node(model: &LpGnnModel, x_v: &[f64]) -> Result<Vec<f64>, LpError> {
    Ok(model.readout.predict(x_v)?)
}

/// Graph-focused readout: f_r of the mean state over `component`.
pub fn readout_graph(
    model: &LpGnnModel,
    x: &Matrix,
    component: std::ops::Range<usize>,
) -> Result<Vec<f64>, LpError> {
    let mean = component_mean(x, component)?;
    Ok(model.readout.predict(&mean)?)
}

fn component_mean(x: &Matrix, component: std::ops::Range<usize>) -> Result<Vec<f64>, LpError> {
    if component.is_empty() {
        return Err(LpError::EmptyComponent);
    }
    let n = component.len() as f64;
    let mut mean = vec![0.0; x.cols()];
    for v in component {
        for (m, xv) in mean.iter_mut().zip(x.row(v)) {
            *m += xv;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Scalar parts of the Lagrangian at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LagrangianTerms {
    /// Supervised loss averaged over S.
    pub loss: f64,
    /// sum_v lambda_v . G(x_v - f_{a,v}).
    pub constraint: f64,
    /// Mean over nodes and components of |x_v - f_{a,v}|.
    pub mean_residual: f64,
    pub max_residual: f64,
    /// Correct argmax predictions among supervised items.
    pub correct: usize,
    pub supervised: usize,
}

impl LagrangianTerms {
    pub fn value(&self) -> f64 {
        self.loss + self.constraint
    }

    pub fn accuracy(&self) -> f64 {
        if self.supervised == 0 {
            0.0
        } else {
            self.correct as f64 / self.supervised as f64
        }
    }
}

/// Value of the Lagrangian at (theta, X, Lambda). Dropout is off.
pub fn lagrangian_value(
    model: &LpGnnModel,
    batch: &GraphBatch,
    x: &Matrix,
    lambda: &Matrix,
) -> Result<f64, LpError> {
    let g = &batch.graph;
    let mut constraint = 0.0;
    for v in 0..g.num_nodes() {
        let (fa, _) = transition_forward(model, g, &batch.index, x, v)?;
        for k in 0..model.state_dim() {
            constraint += lambda.row(v)[k] * model.constraint.value(x.row(v)[k] - fa[k]);
        }
    }
    let mut loss = 0.0;
    match &batch.supervision {
        Supervision::None => {}
        Supervision::Nodes { nodes, targets } => {
            for (&v, &y) in nodes.iter().zip(targets) {
                loss += softmax_cross_entropy(&readout_node(model, x.row(v))?, y).0;
            }
        }
        Supervision::Graphs { components, targets } => {
            for (c, &y) in components.iter().zip(targets) {
                loss += softmax_cross_entropy(&readout_graph(model, x, c.clone())?, y).0;
            }
        }
    }
    let value = loss / batch.supervision.len().max(1) as f64 + constraint;
    if !value.is_finite() {
        return Err(LpError::NonFinite {
            node: None,
            term: "lagrangian value",
        });
    }
    Ok(value)
}

/// The four gradient blocks of the Lagrangian.
#[derive(Debug, Clone)]
pub struct LagrangianGradients {
    pub dx: Matrix,
    pub dtheta_h: Vec<f64>,
    pub dtheta_r: Vec<f64>,
    pub dlambda: Matrix,
    pub terms: LagrangianTerms,
}

/// What to differentiate.
#[derive(Debug, Clone, Copy)]
pub struct GradientOptions {
    /// Compute the weight gradients (skipped for frozen-weight state optimization).
    pub weights: bool,
    pub dropout: Option<DropoutStream>,
    pub exec: Execution,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            weights: true,
            dropout: None,
            exec: Execution::Parallel,
        }
    }
}

struct ConstraintChunk {
    dlambda: Vec<f64>,
    /// lambda_v * G'_v minus the x_v-slice of the transition vjp, per node.
    self_grad: Vec<f64>,
    /// x_u-slice of the transition vjp per neighbor entry, already negated.
    entry_grad: Vec<f64>,
    dtheta_h: Vec<f64>,
    constraint: f64,
    abs_residual: f64,
    max_residual: f64,
}

struct ReadoutChunk {
    input_grads: Vec<Vec<f64>>,
    dtheta_r: Vec<f64>,
    loss: f64,
    correct: usize,
}

/// Analytic gradients of the Lagrangian.
///
/// * `dx_v = L' f'_{r,v} + lambda_v G'_v (1 - df_{a,v}/dx_v) - sum_{w: v in ne[w]} lambda_w G'_w df_{a,w}/dx_v`
/// * `dtheta_fa = - sum_v lambda_v G'_v df_{a,v}/dtheta_fa`
/// * `dtheta_fr = sum_{v in S} L' f'_{r,v}`
/// * `dlambda_v = G(x_v - f_{a,v})`
///
/// Each Jacobian product is a vjp through the h-net or readout.
pub fn gradients(
    model: &LpGnnModel,
    batch: &GraphBatch,
    x: &Matrix,
    lambda: &Matrix,
    opts: &GradientOptions,
) -> Result<LagrangianGradients, LpError> {
    let g = &batch.graph;
    let idx = &batch.index;
    let n = g.num_nodes();
    let s = model.state_dim();
    if x.rows() != n || x.cols() != s || lambda.rows() != n || lambda.cols() != s {
        return Err(LpError::Shape(format!(
            "states {}x{} / multipliers {}x{} for {} nodes with s={}",
            x.rows(),
            x.cols(),
            lambda.rows(),
            lambda.cols(),
            n,
            s
        )));
    }
    let h = &model.h_net;
    let xu_slice = 0..s;
    let xv_start = s + model.node_feature_dim() + 2 * model.arc_feature_dim();
    let xv_slice = xv_start..xv_start + s;
    let cf = model.constraint;

    // constraint terms, node by node
    let chunks = opts.exec.map_chunks(n, CHUNK, |range| -> Result<ConstraintChunk, LpError> {
        let entries = idx.entry_range(range.start).start..idx.entry_range(range.end - 1).end;
        let mut out = ConstraintChunk {
            dlambda: Vec::with_capacity(range.len() * s),
            self_grad: Vec::with_capacity(range.len() * s),
            entry_grad: Vec::with_capacity(entries.len() * s),
            dtheta_h: if opts.weights { vec![0.0; h.num_params()] } else { Vec::new() },
            constraint: 0.0,
            abs_residual: 0.0,
            max_residual: 0.0,
        };
        for v in range {
            let (fa, caches) = transition_forward_masked(model, g, idx, x, v, opts.dropout.as_ref())?;
            let weight = model.aggregation.weight(caches.len());
            let mut cot = vec![0.0; s];
            let base = out.self_grad.len();
            for k in 0..s {
                let r = x.row(v)[k] - fa[k];
                let gv = cf.value(r);
                let lam = lambda.row(v)[k];
                out.dlambda.push(gv);
                out.constraint += lam * gv;
                out.abs_residual += r.abs();
                out.max_residual = out.max_residual.max(r.abs());
                let c = lam * cf.derivative(r);
                out.self_grad.push(c);
                cot[k] = -c * weight;
            }
            if !out.dlambda[base..].iter().all(|d| d.is_finite()) {
                return Err(LpError::NonFinite {
                    node: Some(v),
                    term: "constraint residual",
                });
            }
            let active = cot.iter().any(|&c| c != 0.0);
            for cache in &caches {
                if !active {
                    out.entry_grad.extend(std::iter::repeat_n(0.0, s));
                    continue;
                }
                let gin = if opts.weights {
                    h.vjp_accumulate(cache, &cot, &mut out.dtheta_h)?
                } else {
                    h.vjp_input(cache, &cot)?
                };
                out.entry_grad.extend_from_slice(&gin[xu_slice.clone()]);
                for (sg, gi) in out.self_grad[base..].iter_mut().zip(&gin[xv_slice.clone()]) {
                    *sg += gi;
                }
            }
        }
        Ok(out)
    });
    let mut dlambda = Vec::with_capacity(n * s);
    let mut self_grad = Vec::with_capacity(n * s);
    let mut entry_grad = Vec::with_capacity(idx.num_entries() * s);
    let mut dtheta_h = vec![0.0; if opts.weights { h.num_params() } else { 0 }];
    let mut terms = LagrangianTerms::default();
    let mut abs_residual = 0.0;
    for c in chunks {
        let c = c?;
        dlambda.extend(c.dlambda);
        self_grad.extend(c.self_grad);
        entry_grad.extend(c.entry_grad);
        for (a, b) in dtheta_h.iter_mut().zip(&c.dtheta_h) {
            *a += b;
        }
        terms.constraint += c.constraint;
        abs_residual += c.abs_residual;
        terms.max_residual = terms.max_residual.max(c.max_residual);
    }
    terms.mean_residual = if n * s == 0 { 0.0 } else { abs_residual / (n * s) as f64 };

    // supervised readout
    let readout = &model.readout;
    let items = batch.supervision.len();
    let weight = 1.0 / items.max(1) as f64;
    let rchunks = opts.exec.map_chunks(items, CHUNK, |range| -> Result<ReadoutChunk, LpError> {
        let mut out = ReadoutChunk {
            input_grads: Vec::with_capacity(range.len()),
            dtheta_r: if opts.weights { vec![0.0; readout.num_params()] } else { Vec::new() },
            loss: 0.0,
            correct: 0,
        };
        for i in range {
            let (input, target) = match &batch.supervision {
                Supervision::None => unreachable!(),
                Supervision::Nodes { nodes, targets } => (x.row(nodes[i]).to_vec(), targets[i]),
                Supervision::Graphs { components, targets } => {
                    (component_mean(x, components[i].clone())?, targets[i])
                }
            };
            let mask = opts
                .dropout
                .filter(|_| readout.dropout() > 0.0)
                .map(|d| DropoutMask::sample(readout, &mut d.readout_rng(i)));
            let (logits, cache) = readout.forward(&input, mask.as_ref())?;
            let (loss, mut dlogits) = softmax_cross_entropy(&logits, target);
            dlogits.iter_mut().for_each(|d| *d *= weight);
            out.loss += loss;
            out.correct += usize::from(argmax(&logits) == target);
            let gin = if opts.weights {
                readout.vjp_accumulate(&cache, &dlogits, &mut out.dtheta_r)?
            } else {
                readout.vjp_input(&cache, &dlogits)?
            };
            out.input_grads.push(gin);
        }
        Ok(out)
    });
    let mut dtheta_r = vec![0.0; if opts.weights { readout.num_params() } else { 0 }];
    let mut readout_grad = Matrix::zeros(n, s);
    let mut item = 0;
    for c in rchunks {
        let c = c?;
        for (a, b) in dtheta_r.iter_mut().zip(&c.dtheta_r) {
            *a += b;
        }
        terms.loss += c.loss;
        terms.correct += c.correct;
        for gin in c.input_grads {
            match &batch.supervision {
                Supervision::None => unreachable!(),
                Supervision::Nodes { nodes, .. } => {
                    for (r, gi) in readout_grad.row_mut(nodes[item]).iter_mut().zip(&gin) {
                        *r += gi;
                    }
                }
                Supervision::Graphs { components, .. } => {
                    let comp = components[item].clone();
                    let scale = 1.0 / comp.len() as f64;
                    for v in comp {
                        for (r, gi) in readout_grad.row_mut(v).iter_mut().zip(&gin) {
                            *r += gi * scale;
                        }
                    }
                }
            }
            item += 1;
        }
    }
    terms.loss *= weight;
    terms.supervised = items;

    // gather dx_v from own terms and the entries that reference v
    let dx_parts = opts.exec.map_chunks(n, CHUNK, |range| {
        let mut rows = Vec::with_capacity(range.len() * s);
        for v in range {
            let mut row: Vec<f64> = readout_grad
                .row(v)
                .iter()
                .zip(&self_grad[v * s..(v + 1) * s])
                .map(|(a, b)| a + b)
                .collect();
            for &(_, e) in idx.reverse(v) {
                for (r, eg) in row.iter_mut().zip(&entry_grad[e * s..(e + 1) * s]) {
                    *r += eg;
                }
            }
            rows.extend(row);
        }
        rows
    });
    let dx = Matrix::from_vec(n, s, dx_parts.into_iter().flatten().collect());

    if !terms.value().is_finite() {
        return Err(LpError::NonFinite {
            node: None,
            term: "lagrangian value",
        });
    }
    if let Some(i) = dx.as_slice().iter().position(|d| !d.is_finite()) {
        return Err(LpError::NonFinite {
            node: Some(i / s.max(1)),
            term: "state gradient",
        });
    }
    if dtheta_h.iter().chain(&dtheta_r).any(|d| !d.is_finite()) {
        return Err(LpError::NonFinite {
            node: None,
            term: "weight gradient",
        });
    }
    Ok(LagrangianGradients {
        dx,
        dtheta_h,
        dtheta_r,
        dlambda: Matrix::from_vec(n, s, dlambda),
        terms,
    })
}

/// Readout accuracy of the states on the batch's supervision.
pub fn accuracy(model: &LpGnnModel, batch: &GraphBatch, x: &Matrix) -> Result<f64, LpError> {
    let (correct, total) = correct_count(model, &batch.supervision, x)?;
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Correct predictions and total supervised items.
pub fn correct_count(
    model: &LpGnnModel,
    supervision: &Supervision,
    x: &Matrix,
) -> Result<(usize, usize), LpError> {
    let mut correct = 0;
    match supervision {
        Supervision::None => {}
        Supervision::Nodes { nodes, targets } => {
            for (&v, &y) in nodes.iter().zip(targets) {
                correct += usize::from(argmax(&readout_node(model, x.row(v))?) == y);
            }
        }
        Supervision::Graphs { components, targets } => {
            for (c, &y) in components.iter().zip(targets) {
                correct += usize::from(argmax(&readout_graph(model, x, c.clone())?) == y);
            }
        }
    }
    Ok((correct, supervision.len()))
}

