//! Dense feedforward networks with exact reverse-mode derivatives, dropout
//! masks and the Adam optimizer.
//!
//! Parameters live in one flat vector. Layer `l` maps `widths[l]` inputs to
//! `widths[l + 1]` outputs and stores its weight matrix (row-major,
//! `out x in`) followed by its bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input width {got} does not match network input width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("forward cache was produced by different parameters")]
    StaleCache,
    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("invalid layer widths {0:?}")]
    InvalidWidths(Vec<usize>),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropout(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

static NEXT_GENERATION: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, std::sync::atomic::Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct DenseNetwork {
    widths: Vec<usize>,
    params: Vec<f64>,
    hidden: Activation,
    output: Activation,
    dropout: f64,
    // changes whenever parameters may have changed; guards cached activations
    generation: u64,
}

/// Activations recorded by [`DenseNetwork::forward`] for a later [`DenseNetwork::vjp`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    /// Input to each layer (after dropout scaling for hidden layers).
    layer_inputs: Vec<Vec<f64>>,
    /// Activation outputs before dropout, one per layer.
    outputs: Vec<Vec<f64>>,
    /// Dropout scale per hidden unit (0 or 1/keep), one vector per hidden layer.
    masks: Option<Vec<Vec<f64>>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Inverted-dropout mask over all hidden units of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    scales: Vec<Vec<f64>>,
}

impl DropoutMask {
    /// Samples a mask for `net`; each hidden unit is kept with probability `1 - rate`.
    pub fn sample<R: Rng + ?Sized>(net: &DenseNetwork, rng: &mut R) -> Self {
        let keep = 1.0 - net.dropout;
        let hidden = &net.widths[1..net.widths.len() - 1];
        let scales = hidden
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| {
                        if net.dropout == 0.0 || rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { scales }
    }

    /// Fraction of kept units.
    pub fn density(&self) -> f64 {
        let (kept, total) = self
            .scales
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(k, t), &s| (k + usize::from(s > 0.0), t + 1));
        if total == 0 {
            1.0
        } else {
            kept as f64 / total as f64
        }
    }
}

impl DenseNetwork {
    /// Creates a network with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(widths, hidden, output, dropout)?;
        let mut offset = 0;
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-a..=a);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        dropout: f64,
    ) -> Result<Self, NnError> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(NnError::InvalidWidths(widths.to_vec()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(NnError::InvalidDropout(dropout));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params: vec![0.0; param_count(widths)],
            hidden,
            output,
            dropout,
            generation: fresh_generation(),
        })
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        dropout: f64,
        params: Vec<f64>,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(widths, hidden, output, dropout)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Flattened parameter vector.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = fresh_generation();
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), NnError> {
        if params.len() != self.params.len() {
            return Err(NnError::ParamLength {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        self.generation = fresh_generation();
        Ok(())
    }

    /// Weight matrix (row-major, out x in) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = layer_offset(&self.widths, l);
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let w = &self.params[offset..offset + fan_in * fan_out];
        let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (w, b)
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn forward(
        &self,
        input: &[f64],
        mask: Option<&DropoutMask>,
    ) -> Result<(Vec<f64>, ForwardCache), NnError> {
        if input.len() != self.widths[0] {
            return Err(NnError::WidthMismatch {
                expected: self.widths[0],
                got: input.len(),
            });
        }
        let n_layers = self.num_layers();
        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut outputs = Vec::with_capacity(n_layers);
        let mut current = input.to_vec();
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let act = if l + 1 == n_layers { self.output } else { self.hidden };
            let out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    act.apply(dot(row, &current) + b[o])
                })
                .collect();
            let next = match (mask, l + 1 < n_layers) {
                (Some(m), true) => out.iter().zip(&m.scales[l]).map(|(y, s)| y * s).collect(),
                _ => out.clone(),
            };
            layer_inputs.push(std::mem::replace(&mut current, next));
            outputs.push(out);
        }
        Ok((
            current,
            ForwardCache {
                generation: self.generation,
                layer_inputs,
                outputs,
                masks: mask.map(|m| m.scales.clone()),
            },
        ))
    }

    /// Convenience forward pass without dropout or cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(input, None)?.0)
    }

    /// Reverse-mode product of the output cotangent with the Jacobians.
    /// Returns (gradient w.r.t. parameters, gradient w.r.t. input).
    pub fn vjp(
        &self,
        cache: &ForwardCache,
        output_cotangent: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        let mut grad = vec![0.0; self.params.len()];
        let gx = self.vjp_accumulate(cache, output_cotangent, &mut grad)?;
        Ok((grad, gx))
    }

    /// Like [`DenseNetwork::vjp`] but adds the parameter gradient into `grad_params`.
    pub fn vjp_accumulate(
        &self,
        cache: &ForwardCache,
        output_cotangent: &[f64],
        grad_params: &mut [f64],
    ) -> Result<Vec<f64>, NnError> {
        if grad_params.len() != self.params.len() {
            return Err(NnError::ParamLength {
                expected: self.params.len(),
                got: grad_params.len(),
            });
        }
        self.backward(cache, output_cotangent, Some(grad_params))
    }

    /// Gradient with respect to the input only.
    pub fn vjp_input(&self, cache: &ForwardCache, output_cotangent: &[f64]) -> Result<Vec<f64>, NnError> {
        self.backward(cache, output_cotangent, None)
    }

    fn backward(
        &self,
        cache: &ForwardCache,
        output_cotangent: &[f64],
        mut grad_params: Option<&mut [f64]>,
    ) -> Result<Vec<f64>, NnError> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache);
        }
        if output_cotangent.len() != self.output_width() {
            return Err(NnError::WidthMismatch {
                expected: self.output_width(),
                got: output_cotangent.len(),
            });
        }
        let n_layers = self.num_layers();
        let mut cot = output_cotangent.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let offset = layer_offset(&self.widths, l);
            let act = if l + 1 == n_layers { self.output } else { self.hidden };
            // cot holds d/d(layer output after dropout)
            if l + 1 < n_layers {
                if let Some(masks) = &cache.masks {
                    for (c, s) in cot.iter_mut().zip(&masks[l]) {
                        *c *= s;
                    }
                }
            }
            let delta: Vec<f64> = cot
                .iter()
                .zip(&cache.outputs[l])
                .map(|(c, &y)| c * act.derivative_from_output(y))
                .collect();
            let input = &cache.layer_inputs[l];
            let w = &self.params[offset..offset + fan_in * fan_out];
            let mut next = vec![0.0; fan_in];
            match grad_params.as_deref_mut() {
                Some(grad) => {
                    let (gw, rest) = grad[offset..].split_at_mut(fan_in * fan_out);
                    let gb = &mut rest[..fan_out];
                    for o in 0..fan_out {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        let grow = &mut gw[o * fan_in..(o + 1) * fan_in];
                        let wrow = &w[o * fan_in..(o + 1) * fan_in];
                        for i in 0..fan_in {
                            grow[i] += d * input[i];
                            next[i] += d * wrow[i];
                        }
                    }
                }
                None => {
                    for o in 0..fan_out {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        let wrow = &w[o * fan_in..(o + 1) * fan_in];
                        for i in 0..fan_in {
                            next[i] += d * wrow[i];
                        }
                    }
                }
            }
            cot = next;
        }
        Ok(cot)
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            widths: self.widths.clone(),
            hidden_activation: self.hidden,
            output_activation: self.output,
            dropout: self.dropout,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: NetworkCheckpoint) -> Result<Self, NnError> {
        Self::from_params(
            &c.widths,
            c.hidden_activation,
            c.output_activation,
            c.dropout,
            c.params,
        )
    }
}

/// Serialized network: shape header plus the flat 64-bit parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub dropout: f64,
    pub params: Vec<f64>,
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn layer_offset(widths: &[usize], l: usize) -> usize {
    param_count(&widths[..=l])
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bias-corrected Adam moments for one parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    /// Nothing is modified if the gradient holds a non-finite entry.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), NnError> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(NnError::ParamLength {
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grad.len()
                },
            });
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient { index });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// Ascent step: a descent step on the negated gradient.
    pub fn ascent_step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), NnError> {
        let negated: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.step(params, &negated, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = DenseNetwork::zeros(&[4, 6, 3], Activation::Tanh, Activation::Identity, 0.0).unwrap();
        let y = net.predict(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn identity_network() {
        let mut params = vec![0.0; 3 * 3 + 3];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let net = DenseNetwork::from_params(&[3, 3], Activation::Tanh, Activation::Identity, 0.0, params).unwrap();
        assert_eq!(net.predict(&[0.3, -1.0, 2.5]).unwrap(), vec![0.3, -1.0, 2.5]);
    }

    #[test]
    fn forward_matches_straight_line_recomputation() {
        let net = DenseNetwork::new(&[3, 5, 2], Activation::Tanh, Activation::Identity, 0.0, &mut rng(7)).unwrap();
        let x = [0.4, -0.7, 1.3];
        let (w1, b1) = net.layer(0);
        let (w2, b2) = net.layer(1);
        let mut h = [0.0; 5];
        for o in 0..5 {
            let mut acc = b1[o];
            for i in 0..3 {
                acc += w1[o * 3 + i] * x[i];
            }
            h[o] = acc.tanh();
        }
        let mut y = [0.0; 2];
        for o in 0..2 {
            let mut acc = b2[o];
            for i in 0..5 {
                acc += w2[o * 5 + i] * h[i];
            }
            y[o] = acc;
        }
        let got = net.predict(&x).unwrap();
        for o in 0..2 {
            assert!((got[o] - y[o]).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let net = DenseNetwork::zeros(&[2, 1], Activation::Tanh, Activation::Identity, 0.0).unwrap();
        assert_eq!(
            net.forward(&[1.0], None).unwrap_err(),
            NnError::WidthMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let net = DenseNetwork::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, 0.0, &mut rng(1)).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3], None).unwrap();
        let (gp, gx) = net.vjp(&cache, &[0.0, 0.0]).unwrap();
        assert!(gp.iter().all(|&g| g == 0.0));
        assert!(gx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_linear_product_rule() {
        let net = DenseNetwork::from_params(&[1, 1], Activation::Tanh, Activation::Identity, 0.0, vec![2.5, 0.0]).unwrap();
        let (y, cache) = net.forward(&[-1.5], None).unwrap();
        assert_eq!(y, vec![-3.75]);
        let (gp, gx) = net.vjp(&cache, &[1.0]).unwrap();
        assert_eq!(gp, vec![-1.5, 1.0]);
        assert_eq!(gx, vec![2.5]);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = DenseNetwork::new(&[2, 2], Activation::Tanh, Activation::Identity, 0.0, &mut rng(3)).unwrap();
        let (_, cache) = net.forward(&[1.0, 1.0], None).unwrap();
        net.params_mut()[0] += 1.0;
        assert_eq!(net.vjp(&cache, &[1.0, 0.0]).unwrap_err(), NnError::StaleCache);
    }

    /// Central finite differences of `c . net(x)`.
    fn fd_check(net: &DenseNetwork, x: &[f64], c: &[f64], mask: Option<&DropoutMask>) -> f64 {
        let h = 1e-5;
        let f = |n: &DenseNetwork, x: &[f64]| -> f64 {
            let y = n.forward(x, mask).unwrap().0;
            y.iter().zip(c).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = net.forward(x, mask).unwrap();
        let (gp, gx) = net.vjp(&cache, c).unwrap();
        let mut worst: f64 = 0.0;
        let mut rel = |analytic: f64, numeric: f64| {
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((analytic - numeric).abs() / scale);
        };
        for i in 0..net.num_params() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = f(&p, x);
            p.params_mut()[i] -= 2.0 * h;
            let down = f(&p, x);
            rel(gp[i], (up - down) / (2.0 * h));
        }
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let up = f(net, &xp);
            xp[i] -= 2.0 * h;
            let down = f(net, &xp);
            rel(gx[i], (up - down) / (2.0 * h));
        }
        worst
    }

    #[test]
    fn vjp_matches_finite_differences_on_random_nets() {
        for seed in 0..24 {
            let mut r = rng(100 + seed);
            let depth = 1 + (seed as usize % 3);
            let mut widths = vec![r.random_range(1..6)];
            for _ in 0..depth {
                widths.push(r.random_range(1..7));
            }
            let net = DenseNetwork::new(&widths, Activation::Tanh, Activation::Identity, 0.0, &mut r).unwrap();
            let x: Vec<f64> = (0..widths[0]).map(|_| r.random_range(-1.5..1.5)).collect();
            let c: Vec<f64> = (0..net.output_width()).map(|_| r.random_range(-1.0..1.0)).collect();
            let err = fd_check(&net, &x, &c, None);
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn vjp_respects_dropout_mask() {
        let mut r = rng(5);
        let net = DenseNetwork::new(&[3, 8, 8, 2], Activation::Tanh, Activation::Identity, 0.5, &mut r).unwrap();
        let mask = DropoutMask::sample(&net, &mut r);
        let err = fd_check(&net, &[0.2, -0.4, 0.9], &[1.0, -0.5], Some(&mask));
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let mut r = rng(9);
        let net = DenseNetwork::new(&[2, 5, 1], Activation::Tanh, Activation::Identity, 0.0, &mut r).unwrap();
        let mask = DropoutMask::sample(&net, &mut r);
        assert_eq!(mask.density(), 1.0);
        let x = [0.3, 0.1];
        assert_eq!(net.forward(&x, Some(&mask)).unwrap().0, net.predict(&x).unwrap());
    }

    #[test]
    fn dropout_density_within_three_sigma() {
        let p = 0.7;
        let mut r = rng(11);
        let net = DenseNetwork::new(&[1, 100, 1], Activation::Tanh, Activation::Identity, p, &mut r).unwrap();
        let draws = 10_000 / 100;
        let mut kept = 0.0;
        for _ in 0..draws {
            kept += DropoutMask::sample(&net, &mut r).density() * 100.0;
        }
        let n = (draws * 100) as f64;
        let density = kept / n;
        let sigma = ((1.0 - p) * p / n).sqrt();
        assert!((density - (1.0 - p)).abs() < 3.0 * sigma, "density {density}");
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3);
        let mut theta = vec![1.0, -2.0, 0.5];
        adam.step(&mut theta, &[0.0; 3], 0.1).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
        assert_eq!(adam.timestep(), 1);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        let mut adam = AdamState::new(2);
        let mut theta = vec![0.0, 0.0];
        adam.step(&mut theta, &[3.0, -0.02], 0.01).unwrap();
        assert!((theta[0] + 0.01).abs() < 1e-9);
        assert!((theta[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn adam_minimizes_parabola() {
        // independent scalar recurrence of the bias-corrected update on f = theta^2
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut m, mut v, mut th) = (0.0, 0.0, 1.0f64);
        for t in 1..=100 {
            let g = 2.0 * th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            th -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        assert!(th.abs() < 0.1);

        let mut adam = AdamState::new(1);
        let mut theta = vec![1.0];
        for _ in 0..100 {
            let g = [2.0 * theta[0]];
            adam.step(&mut theta, &g, 0.1).unwrap();
        }
        assert!(theta[0].abs() < 0.1);
        assert!((theta[0] - th).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut adam = AdamState::new(2);
        let mut theta = vec![0.0, 0.0];
        assert_eq!(
            adam.step(&mut theta, &[0.0, f64::NAN], 0.1).unwrap_err(),
            NnError::NonFiniteGradient { index: 1 }
        );
        assert_eq!(adam.timestep(), 0);
    }

    #[test]
    fn adam_ascent_moves_up() {
        let mut adam = AdamState::new(1);
        let mut lambda = vec![0.0];
        adam.ascent_step(&mut lambda, &[2.0], 0.05).unwrap();
        assert!(lambda[0] > 0.0);
    }

    proptest! {
        #[test]
        fn flatten_unflatten_roundtrip(seed in 0u64..1000, a in 1usize..6, b in 1usize..6, c in 1usize..4) {
            let net = DenseNetwork::new(&[a, b, c], Activation::Tanh, Activation::Identity, 0.0, &mut rng(seed)).unwrap();
            let back = DenseNetwork::from_checkpoint(net.to_checkpoint()).unwrap();
            prop_assert_eq!(back.params(), net.params());
            prop_assert_eq!(back.widths(), net.widths());
        }
    }
}
