//! Dense feed-forward network.
//!
//! Parameters live in one flat buffer. Layer `k` occupies
//! `[W_k (out × in, row-major) | b_k (out)]`, layers in order. Gradients use the
//! same layout, which keeps the optimizer and finite-difference checks trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected tanh, relu or identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    /// Start of each layer's weight block in `params`.
    offsets: Vec<usize>,
}

/// Post-activation values of every layer for one forward pass; `layers[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        self.layers.first().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn layer_offsets(dims: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(dims.len() - 1);
    let mut at = 0;
    for w in dims.windows(2) {
        offsets.push(at);
        at += w[1] * w[0] + w[1];
    }
    (offsets, at)
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "an MLP needs at least input and output dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer dims must be >= 1, got {dims:?}")));
    }
    Ok(())
}

impl Mlp {
    /// Uniform fan-in initialization `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn new(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let (offsets, n) = layer_offsets(dims);
        let mut params = vec![0.0; n];
        let mut rng = crate::seed::rng(seed);
        for (k, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let start = offsets[k];
            for p in &mut params[start..start + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params,
            offsets,
        })
    }

    /// All-zero parameters.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let (offsets, n) = layer_offsets(dims);
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params: vec![0.0; n],
            offsets,
        })
    }

    /// Build from per-layer row-major weights and biases.
    pub fn from_layers(
        dims: &[usize],
        activation: Activation,
        weights: &[Vec<f64>],
        biases: &[Vec<f64>],
    ) -> Result<Self> {
        let mut mlp = Self::zeros(dims, activation)?;
        let n_layers = mlp.n_layers();
        if weights.len() != n_layers {
            return Err(Error::shape("weight layers", n_layers, weights.len()));
        }
        if biases.len() != n_layers {
            return Err(Error::shape("bias layers", n_layers, biases.len()));
        }
        for k in 0..n_layers {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            if weights[k].len() != fan_in * fan_out {
                return Err(Error::shape("layer weights", fan_in * fan_out, weights[k].len()));
            }
            if biases[k].len() != fan_out {
                return Err(Error::shape("layer biases", fan_out, biases[k].len()));
            }
            let start = mlp.offsets[k];
            mlp.params[start..start + fan_in * fan_out].copy_from_slice(&weights[k]);
            mlp.params[start + fan_in * fan_out..start + fan_in * fan_out + fan_out]
                .copy_from_slice(&biases[k]);
        }
        if mlp.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("MLP parameters".into()));
        }
        Ok(mlp)
    }

    /// Square single-layer net computing the identity map.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut mlp = Self::zeros(&[dim, dim], Activation::Identity)?;
        for i in 0..dim {
            mlp.params[i * dim + i] = 1.0;
        }
        Ok(mlp)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims validated non-empty")
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major weights of layer `k`.
    pub fn weights(&self, k: usize) -> &[f64] {
        let start = self.offsets[k];
        &self.params[start..start + self.dims[k] * self.dims[k + 1]]
    }

    pub fn biases(&self, k: usize) -> &[f64] {
        let start = self.offsets[k] + self.dims[k] * self.dims[k + 1];
        &self.params[start..start + self.dims[k + 1]]
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let start = self.offsets[k];
        let n = self.dims[k] * self.dims[k + 1];
        &mut self.params[start..start + n]
    }

    pub fn biases_mut(&mut self, k: usize) -> &mut [f64] {
        let start = self.offsets[k] + self.dims[k] * self.dims[k + 1];
        let n = self.dims[k + 1];
        &mut self.params[start..start + n]
    }

    fn affine(&self, k: usize, input: &[f64], out: &mut Vec<f64>) {
        let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
        let w = self.weights(k);
        let b = self.biases(k);
        out.clear();
        out.extend(
            w.chunks_exact(fan_in)
                .zip(b)
                .map(|(row, &bias)| bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()),
        );
        debug_assert_eq!(out.len(), fan_out);
    }

    /// Forward pass recording every layer's activations into `trace`.
    ///
    /// Panics if `x` has the wrong length; use [`Mlp::forward`] for a checked call.
    pub fn forward_traced(&self, x: &[f64], trace: &mut Trace) {
        assert_eq!(x.len(), self.input_dim(), "MLP input length");
        let n_layers = self.n_layers();
        trace.layers.resize_with(n_layers + 1, Vec::new);
        trace.layers[0].clear();
        trace.layers[0].extend_from_slice(x);
        for k in 0..n_layers {
            let (done, rest) = trace.layers.split_at_mut(k + 1);
            let out = &mut rest[0];
            self.affine(k, &done[k], out);
            if k + 1 < n_layers {
                let act = self.activation;
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("MLP input", self.input_dim(), x.len()));
        }
        let mut trace = Trace::default();
        self.forward_traced(x, &mut trace);
        let out = trace.layers.pop().unwrap_or_default();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("MLP forward".into()));
        }
        Ok(out)
    }

    /// Unchecked forward pass reusing `trace`; returns the output slice.
    pub fn eval<'t>(&self, x: &[f64], trace: &'t mut Trace) -> &'t [f64] {
        self.forward_traced(x, trace);
        trace.output()
    }

    /// Accumulate parameter gradients for one traced sample given `d_out = dLoss/dOutput`.
    ///
    /// `grads` has the same layout as [`Mlp::params`] and is added to, not overwritten.
    /// When `d_input` is given it receives (overwrites) `dLoss/dInput`.
    pub fn backward(
        &self,
        trace: &Trace,
        d_out: &[f64],
        grads: &mut [f64],
        mut d_input: Option<&mut [f64]>,
    ) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        assert_eq!(d_out.len(), self.output_dim(), "output gradient length");
        let n_layers = self.n_layers();
        let mut delta = d_out.to_vec();
        let mut d_prev = Vec::new();
        for k in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
            let a_prev = &trace.layers[k];
            let start = self.offsets[k];
            let (gw, rest) = grads[start..].split_at_mut(fan_in * fan_out);
            let gb = &mut rest[..fan_out];
            for ((grow, gbias), &d) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).zip(&delta) {
                *gbias += d;
                if d != 0.0 {
                    grow.iter_mut().zip(a_prev).for_each(|(g, a)| *g += d * a);
                }
            }
            let needs_input_grad = k > 0 || d_input.is_some();
            if !needs_input_grad {
                break;
            }
            d_prev.clear();
            d_prev.resize(fan_in, 0.0);
            let w = self.weights(k);
            for (row, &d) in w.chunks_exact(fan_in).zip(&delta) {
                if d != 0.0 {
                    d_prev.iter_mut().zip(row).for_each(|(acc, wij)| *acc += d * wij);
                }
            }
            if k > 0 {
                let act = self.activation;
                d_prev
                    .iter_mut()
                    .zip(a_prev)
                    .for_each(|(g, &a)| *g *= act.derivative_from_output(a));
                std::mem::swap(&mut delta, &mut d_prev);
            } else if let Some(dst) = d_input.as_deref_mut() {
                dst.copy_from_slice(&d_prev);
            }
        }
    }

    /// Mean squared error over batch elements and output components, and its exact gradient.
    pub fn mse_gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if inputs.is_empty() {
            return Err(Error::Usage("gradient of an empty batch".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::shape("target batch", inputs.len(), targets.len()));
        }
        let n_out = self.output_dim();
        let scale = 1.0 / (inputs.len() * n_out) as f64;
        let mut grads = vec![0.0; self.params.len()];
        let mut trace = Trace::default();
        let mut d_out = vec![0.0; n_out];
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            if x.len() != self.input_dim() {
                return Err(Error::shape("MLP input", self.input_dim(), x.len()));
            }
            if t.len() != n_out {
                return Err(Error::shape("MLP target", n_out, t.len()));
            }
            self.forward_traced(x, &mut trace);
            for ((d, y), t) in d_out.iter_mut().zip(trace.output()).zip(t) {
                let r = y - t;
                loss += r * r * scale;
                *d = 2.0 * r * scale;
            }
            self.backward(&trace, &d_out, &mut grads, None);
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("MSE loss".into()));
        }
        Ok((loss, grads))
    }

    pub fn to_snapshot(&self) -> MlpSnapshot {
        MlpSnapshot {
            layer_dims: self.dims.clone(),
            activation: self.activation,
            weights: (0..self.n_layers()).map(|k| self.weights(k).to_vec()).collect(),
            biases: (0..self.n_layers()).map(|k| self.biases(k).to_vec()).collect(),
        }
    }

    pub fn from_snapshot(s: &MlpSnapshot) -> Result<Self> {
        Self::from_layers(&s.layer_dims, s.activation, &s.weights, &s.biases)
    }
}

/// Serializable form of an [`Mlp`]: per-layer row-major weight and bias arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSnapshot {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes() {
        let m = Mlp::new(&[2, 4, 1], Activation::Tanh, 7).unwrap();
        assert_eq!(m.weights(0).len(), 4 * 2);
        assert_eq!(m.weights(1).len(), 4);
        assert_eq!(m.biases(0).len(), 4);
        assert_eq!(m.biases(1).len(), 1);
        assert_eq!(m.n_params(), 8 + 4 + 4 + 1);
    }

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::new(&[3, 5, 2], Activation::Tanh, 42).unwrap();
        let b = Mlp::new(&[3, 5, 2], Activation::Tanh, 42).unwrap();
        let bits = |m: &Mlp| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = Mlp::new(&[3, 5, 2], Activation::Tanh, 43).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn init_biases_zero_and_weights_bounded() {
        let m = Mlp::new(&[3, 2], Activation::Relu, 99).unwrap();
        assert!(m.biases(0).iter().all(|&b| b == 0.0));
        let limit = (6.0f64 / 3.0).sqrt();
        assert!(m.weights(0).iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(matches!(Mlp::new(&[3], Activation::Tanh, 0), Err(Error::Config(_))));
        assert!(matches!(Mlp::new(&[3, 0, 1], Activation::Tanh, 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_weights_output_last_bias() {
        let mut m = Mlp::zeros(&[2, 3, 2], Activation::Tanh).unwrap();
        m.biases_mut(0).copy_from_slice(&[0.3, -0.1, 2.0]);
        m.biases_mut(1).copy_from_slice(&[1.5, -2.5]);
        assert_eq!(m.forward(&[10.0, -4.0]).unwrap(), vec![1.5, -2.5]);
    }

    #[test]
    fn identity_layer() {
        let m = Mlp::identity(4).unwrap();
        let x = [1.25, -3.0, 0.0, 7.5];
        assert_eq!(m.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let m = Mlp::new(&[2, 3, 1], Activation::Tanh, 0).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn forward_matches_hand_written_evaluation() {
        let m = Mlp::new(&[2, 3, 1], Activation::Tanh, 5).unwrap();
        let x = [0.7, -1.3];
        // Straight-line evaluation of tanh(W1 x + b1), then W2 h + b2.
        let p = m.params();
        let w1 = &p[0..6];
        let b1 = &p[6..9];
        let w2 = &p[9..12];
        let b2 = p[12];
        let h: Vec<f64> = (0..3)
            .map(|i| (w1[2 * i] * x[0] + w1[2 * i + 1] * x[1] + b1[i]).tanh())
            .collect();
        let expected = w2[0] * h[0] + w2[1] * h[1] + w2[2] * h[2] + b2;
        let got = m.forward(&x).unwrap()[0];
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let m = Mlp::new(&[4, 8, 8, 3], Activation::Tanh, 1).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let a = m.forward(&x).unwrap();
        let b = m.forward(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let m = Mlp::new(&[2, 4, 2], Activation::Tanh, 3).unwrap();
        let xs = vec![vec![0.1, 0.5], vec![-1.0, 2.0]];
        let ts: Vec<_> = xs.iter().map(|x| m.forward(x).unwrap()).collect();
        let (loss, g) = m.mse_gradient(&xs, &ts).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_batch_is_usage_error() {
        let m = Mlp::new(&[2, 1], Activation::Tanh, 3).unwrap();
        assert!(matches!(m.mse_gradient(&[], &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn affine_gradient_is_linear_in_residual() {
        let m = Mlp::new(&[3, 2], Activation::Identity, 11).unwrap();
        let xs = vec![vec![0.2, -0.4, 1.0], vec![1.5, 0.3, -0.7]];
        let ys: Vec<_> = xs.iter().map(|x| m.forward(x).unwrap()).collect();
        let offset = [0.3, -0.8];
        let shifted = |s: f64| -> Vec<Vec<f64>> {
            ys.iter()
                .map(|y| y.iter().zip(offset).map(|(v, o)| v - s * o).collect())
                .collect()
        };
        let (_, g1) = m.mse_gradient(&xs, &shifted(1.0)).unwrap();
        let (_, g2) = m.mse_gradient(&xs, &shifted(2.0)).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let m = Mlp::new(&[3, 4, 2], Activation::Relu, 8).unwrap();
        let back = Mlp::from_snapshot(&m.to_snapshot()).unwrap();
        assert_eq!(m, back);
    }
}
