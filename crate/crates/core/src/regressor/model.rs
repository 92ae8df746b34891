use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::{build_state, shift_in_place, StateMapSpec};
use crate::datagen::{Normalization, Trajectory};
use crate::json::{read_versioned, write_pretty};
use crate::nn::{Activation, Mlp, MlpSnapshot, Trace};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trajectory in normalized units, stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    pub len: usize,
    n_u: usize,
    n_y: usize,
    u: Vec<f64>,
    y: Vec<f64>,
}

impl Series {
    pub fn new(traj: &Trajectory, norm: &Normalization) -> Self {
        let (n_u, n_y) = (norm.n_u(), norm.n_y());
        let mut u = vec![0.0; traj.len() * n_u];
        let mut y = vec![0.0; traj.len() * n_y];
        for (t, (ut, yt)) in traj.inputs.iter().zip(&traj.outputs).enumerate() {
            norm.normalize_u_into(ut, &mut u[t * n_u..(t + 1) * n_u]);
            norm.normalize_y_into(yt, &mut y[t * n_y..(t + 1) * n_y]);
        }
        Self {
            len: traj.len(),
            n_u,
            n_y,
            u,
            y,
        }
    }

    pub fn u(&self, t: usize) -> &[f64] {
        &self.u[t * self.n_u..(t + 1) * self.n_u]
    }

    pub fn y(&self, t: usize) -> &[f64] {
        &self.y[t * self.n_y..(t + 1) * self.n_y]
    }

    /// State built from the pairs at `start..start + ell`.
    pub fn window(&self, spec: &StateMapSpec, start: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(spec.state_dim());
        for t in start..start + spec.ell {
            z.extend_from_slice(self.u(t));
            z.extend_from_slice(self.y(t));
        }
        z
    }
}

/// Learned output map over the window state, with the normalization it was trained in.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    spec: StateMapSpec,
    net: Mlp,
    normalization: Normalization,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    ell: usize,
    n_u: usize,
    n_y: usize,
    normalization: Normalization,
}

impl RegressorModel {
    /// Fresh model with `hidden` layer widths between the `L + n_u` input and `n_y` output.
    pub fn new(
        spec: StateMapSpec,
        hidden: &[usize],
        activation: Activation,
        normalization: Normalization,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let mut dims = vec![spec.input_dim()];
        dims.extend_from_slice(hidden);
        dims.push(spec.n_y);
        Self::from_parts(spec, Mlp::new(&dims, activation, seed)?, normalization)
    }

    pub fn from_parts(spec: StateMapSpec, net: Mlp, normalization: Normalization) -> Result<Self> {
        spec.validate()?;
        normalization.validate()?;
        if net.input_dim() != spec.input_dim() {
            return Err(Error::shape("output map input", spec.input_dim(), net.input_dim()));
        }
        if net.output_dim() != spec.n_y {
            return Err(Error::shape("output map output", spec.n_y, net.output_dim()));
        }
        if normalization.n_u() != spec.n_u || normalization.n_y() != spec.n_y {
            return Err(Error::Config("normalization dims do not match the window spec".into()));
        }
        Ok(Self {
            spec,
            net,
            normalization,
        })
    }

    pub fn spec(&self) -> &StateMapSpec {
        &self.spec
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Normalized state from `ell` raw input/output pairs, oldest first.
    pub fn initial_state(&self, inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let z = build_state(&self.spec, inputs, outputs)?;
        let (n_u, m) = (self.spec.n_u, self.spec.block());
        let mut out = z.clone();
        for (block, dst) in z.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
            self.normalization.normalize_u_into(&block[..n_u], &mut dst[..n_u]);
            self.normalization.normalize_y_into(&block[n_u..], &mut dst[n_u..]);
        }
        Ok(out)
    }

    /// Normalized prediction `H(z, u)`; `input` is scratch space of length `L + n_u`.
    pub(crate) fn predict<'t>(&self, z: &[f64], u: &[f64], input: &mut Vec<f64>, trace: &'t mut Trace) -> &'t [f64] {
        input.clear();
        input.extend_from_slice(z);
        input.extend_from_slice(u);
        self.net.eval(input, trace)
    }

    /// Free-run prediction: the window is initialized from measured pairs, then only
    /// the model's own outputs enter it. Raw units in and out.
    pub fn rollout(
        &self,
        init_inputs: &[Vec<f64>],
        init_outputs: &[Vec<f64>],
        inputs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        let mut z = self.initial_state(init_inputs, init_outputs)?;
        let mut input = Vec::with_capacity(self.spec.input_dim());
        let mut trace = Trace::default();
        let mut u_norm = vec![0.0; self.spec.n_u];
        let mut out = Vec::with_capacity(inputs.len());
        for u in inputs {
            if u.len() != self.spec.n_u {
                return Err(Error::shape("rollout input", self.spec.n_u, u.len()));
            }
            self.normalization.normalize_u_into(u, &mut u_norm);
            let y = self.predict(&z, &u_norm, &mut input, &mut trace);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("rollout prediction".into()));
            }
            out.push(self.normalization.denormalize_y(y));
            shift_in_place(&self.spec, &mut z, &u_norm, y);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let snap = self.net.to_snapshot();
        let doc = Checkpoint {
            format_version: MODEL_FORMAT_VERSION,
            layer_dims: snap.layer_dims,
            activation: snap.activation,
            weights: snap.weights,
            biases: snap.biases,
            ell: self.spec.ell,
            n_u: self.spec.n_u,
            n_y: self.spec.n_y,
            normalization: self.normalization.clone(),
        };
        write_pretty(path, &doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: Checkpoint = read_versioned(path, MODEL_FORMAT_VERSION)?;
        let net = Mlp::from_snapshot(&MlpSnapshot {
            layer_dims: doc.layer_dims,
            activation: doc.activation,
            weights: doc.weights,
            biases: doc.biases,
        })?;
        Self::from_parts(StateMapSpec::new(doc.ell, doc.n_u, doc.n_y)?, net, doc.normalization)
    }
}
