use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{Normalization, Trajectory};
use crate::json::{read_versioned, write_pretty};
use crate::nn::{clip_grad_norm, Activation, Adam, AdamConfig, Mlp, MlpSnapshot, Trace, GRAD_CLIP_NORM};
use crate::regressor::{RegressorModel, Series, StateMapSpec};
use crate::{exec, seed, Error, Result};

pub const AUTOENCODER_FORMAT_VERSION: u32 = 1;

const STREAM_INIT: u64 = 21;
const STREAM_SHUFFLE: u64 = 22;
/// Fixed gradient shards per minibatch, so the summation order never depends on threads.
const SHARDS: usize = 8;

/// Every window state of every trajectory in normalized units:
/// `sum_i (T_i - ell + 1)` vectors of length `L`.
pub fn collect_states(trajectories: &[Trajectory], spec: &StateMapSpec, norm: &Normalization) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for t in trajectories.iter().filter(|t| t.len() >= spec.ell) {
        let s = Series::new(t, norm);
        out.extend((0..=s.len - spec.ell).map(|k| s.window(spec, k)));
    }
    out
}

/// Window states that have a following step, with that step's normalized input and
/// output: the samples of the joint reconstruction-plus-prediction objective.
pub(crate) fn collect_transitions(
    trajectories: &[Trajectory],
    spec: &StateMapSpec,
    norm: &Normalization,
) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for t in trajectories.iter().filter(|t| t.len() > spec.ell) {
        let s = Series::new(t, norm);
        out.extend((0..s.len - spec.ell).map(|k| {
            let next = k + spec.ell;
            (s.window(spec, k), s.u(next).to_vec(), s.y(next).to_vec())
        }));
    }
    out
}

/// `round((1 - rate) * L)`, at least 1.
pub fn latent_dim_for_rate(state_dim: usize, rate: f64) -> usize {
    (((1.0 - rate) * state_dim as f64).round() as usize).max(1)
}

/// Encoder `L -> n` and decoder `n -> L` over normalized window states.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    spec: StateMapSpec,
    encoder: Mlp,
    decoder: Mlp,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    latent_dim: usize,
    encoder: MlpSnapshot,
    decoder: MlpSnapshot,
    source_spec: StateMapSpec,
}

impl Autoencoder {
    pub fn new(
        spec: StateMapSpec,
        latent_dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let l = spec.state_dim();
        let mut enc = vec![l];
        enc.extend_from_slice(hidden);
        enc.push(latent_dim);
        let mut dec = vec![latent_dim];
        dec.extend(hidden.iter().rev());
        dec.push(l);
        Self::from_parts(
            spec,
            Mlp::new(&enc, activation, seed::derive(seed, STREAM_INIT, 0))?,
            Mlp::new(&dec, activation, seed::derive(seed, STREAM_INIT, 1))?,
        )
    }

    /// Exact identity pair (`n = L`).
    pub fn identity(spec: StateMapSpec) -> Result<Self> {
        let l = spec.state_dim();
        Self::from_parts(spec, Mlp::identity(l)?, Mlp::identity(l)?)
    }

    pub fn from_parts(spec: StateMapSpec, encoder: Mlp, decoder: Mlp) -> Result<Self> {
        spec.validate()?;
        let l = spec.state_dim();
        if encoder.input_dim() != l {
            return Err(Error::shape("encoder input", l, encoder.input_dim()));
        }
        if decoder.output_dim() != l {
            return Err(Error::shape("decoder output", l, decoder.output_dim()));
        }
        if decoder.input_dim() != encoder.output_dim() {
            return Err(Error::shape("decoder input", encoder.output_dim(), decoder.input_dim()));
        }
        if encoder.output_dim() > l {
            return Err(Error::Config(format!(
                "latent dim {} exceeds the state dim {l}",
                encoder.output_dim()
            )));
        }
        Ok(Self {
            spec,
            encoder,
            decoder,
        })
    }

    pub fn spec(&self) -> &StateMapSpec {
        &self.spec
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(z)
    }

    pub fn decode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(x)
    }

    /// Mean of `|z - D(E(z))|^2 / L` over `states`.
    pub fn reconstruction_mse(&self, states: &[Vec<f64>]) -> Result<f64> {
        if states.is_empty() {
            return Err(Error::Usage("reconstruction error of an empty state set".into()));
        }
        let l = self.spec.state_dim();
        let per = exec::map(states, |z| -> Result<f64> {
            if z.len() != l {
                return Err(Error::shape("state", l, z.len()));
            }
            let mut te = Trace::default();
            let mut td = Trace::default();
            let x = self.encoder.eval(z, &mut te);
            let r = self.decoder.eval(x, &mut td);
            Ok(r.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / l as f64)
        });
        let mut sum = 0.0;
        for v in per {
            sum += v?;
        }
        let mse = sum / states.len() as f64;
        if !mse.is_finite() {
            return Err(Error::Numeric("reconstruction error".into()));
        }
        Ok(mse)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_pretty(
            path,
            &Checkpoint {
                format_version: AUTOENCODER_FORMAT_VERSION,
                latent_dim: self.latent_dim(),
                encoder: self.encoder.to_snapshot(),
                decoder: self.decoder.to_snapshot(),
                source_spec: self.spec,
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: Checkpoint = read_versioned(path, AUTOENCODER_FORMAT_VERSION)?;
        let ae = Self::from_parts(
            doc.source_spec,
            Mlp::from_snapshot(&doc.encoder)?,
            Mlp::from_snapshot(&doc.decoder)?,
        )?;
        if ae.latent_dim() != doc.latent_dim {
            return Err(Error::shape("autoencoder latent dim", doc.latent_dim, ae.latent_dim()));
        }
        Ok(ae)
    }

    fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.n_params()
    }

    /// Add the gradient of `weight * |D(E(z)) - z|^2 / L` (plus, with `predictor`, of
    /// `weight * |H(D(E(z)), u) - y|^2 / n_y`) to `grads` (encoder then decoder
    /// parameters). Returns the unweighted loss terms summed.
    fn accumulate(
        &self,
        z: &[f64],
        predictor: Option<(&Mlp, &[f64], &[f64])>,
        weight: f64,
        grads: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        let l = self.spec.state_dim();
        let (ge, gd) = grads.split_at_mut(self.encoder.n_params());
        self.encoder.forward_traced(z, &mut scratch.enc);
        self.decoder.forward_traced(scratch.enc.output(), &mut scratch.dec);
        let recon = scratch.dec.output();
        let mut loss = 0.0;
        scratch.d_recon.clear();
        for (r, t) in recon.iter().zip(z) {
            loss += (r - t) * (r - t) / l as f64;
            scratch.d_recon.push(weight * 2.0 * (r - t) / l as f64);
        }
        if let Some((h, u, y)) = predictor {
            scratch.h_input.clear();
            scratch.h_input.extend_from_slice(recon);
            scratch.h_input.extend_from_slice(u);
            h.forward_traced(&scratch.h_input, &mut scratch.h);
            let n_y = y.len();
            scratch.d_pred.clear();
            for (p, t) in scratch.h.output().iter().zip(y) {
                loss += (p - t) * (p - t) / n_y as f64;
                scratch.d_pred.push(weight * 2.0 * (p - t) / n_y as f64);
            }
            scratch.h_grads.resize(h.n_params(), 0.0);
            scratch.d_h_input.resize(h.input_dim(), 0.0);
            h.backward(&scratch.h, &scratch.d_pred, &mut scratch.h_grads, Some(&mut scratch.d_h_input));
            for (d, extra) in scratch.d_recon.iter_mut().zip(&scratch.d_h_input[..l]) {
                *d += extra;
            }
        }
        scratch.d_latent.resize(self.latent_dim(), 0.0);
        self.decoder
            .backward(&scratch.dec, &scratch.d_recon, gd, Some(&mut scratch.d_latent));
        self.encoder.backward(&scratch.enc, &scratch.d_latent, ge, None);
        loss
    }

    fn params_to(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.encoder.params());
        out.extend_from_slice(self.decoder.params());
    }

    fn set_params(&mut self, p: &[f64]) {
        let (e, d) = p.split_at(self.encoder.n_params());
        self.encoder.params_mut().copy_from_slice(e);
        self.decoder.params_mut().copy_from_slice(d);
    }
}

#[derive(Default)]
struct Scratch {
    enc: Trace,
    dec: Trace,
    h: Trace,
    h_input: Vec<f64>,
    h_grads: Vec<f64>,
    d_h_input: Vec<f64>,
    d_recon: Vec<f64>,
    d_pred: Vec<f64>,
    d_latent: Vec<f64>,
}

/// Mean reconstruction loss and its gradient over `samples`. Public for gradient checks.
pub fn reconstruction_gradient(ae: &Autoencoder, samples: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Usage("gradient of an empty batch".into()));
    }
    let l = ae.spec.state_dim();
    let mut grads = vec![0.0; ae.n_params()];
    let mut scratch = Scratch::default();
    let w = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    for z in samples {
        if z.len() != l {
            return Err(Error::shape("state", l, z.len()));
        }
        loss += ae.accumulate(z, None, w, &mut grads, &mut scratch);
    }
    Ok((loss * w, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub grad_clip: f64,
    /// Also penalize the output map's one-step prediction error through `D(E(z))`.
    pub joint: bool,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            hidden: vec![512, 512],
            activation: Activation::Tanh,
            adam: AdamConfig::default(),
            batch_size: 256,
            grad_clip: GRAD_CLIP_NORM,
            joint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AeEpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeReport {
    pub epochs: Vec<AeEpochRecord>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

/// Training samples: states, plus the following step's input and output in joint mode.
pub struct AeData<'a> {
    pub states: &'a [Vec<f64>],
    /// `(u_next, y_next)` per state, normalized; required when training jointly.
    pub next: Option<&'a [(Vec<f64>, Vec<f64>)]>,
}

/// Fit an autoencoder by minibatch Adam on the reconstruction loss; with `cfg.joint`
/// and a `predictor`, the predictor's one-step error through the reconstruction is added
/// with weight 1 (the predictor stays frozen). Returns the parameters with the lowest
/// validation loss.
pub fn train_autoencoder(
    spec: StateMapSpec,
    train: AeData<'_>,
    valid: AeData<'_>,
    latent_dim: usize,
    cfg: &AeTrainConfig,
    predictor: Option<&RegressorModel>,
    seed: u64,
) -> Result<(Autoencoder, AeReport)> {
    if latent_dim == 0 {
        return Err(Error::Config("latent dim must be >= 1".into()));
    }
    if train.states.is_empty() {
        return Err(Error::Usage("no states to train the autoencoder on".into()));
    }
    if cfg.batch_size == 0 || !(cfg.adam.lr > 0.0) {
        return Err(Error::Config("autoencoder batch size and learning rate must be positive".into()));
    }
    let h = if cfg.joint {
        let p = predictor.ok_or_else(|| Error::Usage("joint training needs the output map".into()))?;
        if p.spec() != &spec {
            return Err(Error::Usage("output map window spec differs from the autoencoder's".into()));
        }
        for d in [&train, &valid] {
            match d.next {
                Some(n) if n.len() == d.states.len() => {}
                _ => return Err(Error::Usage("joint training needs the next step for every state".into())),
            }
        }
        Some(p.net())
    } else {
        None
    };
    let mut ae = Autoencoder::new(spec, latent_dim, &cfg.hidden, cfg.activation, seed)?;
    let n_params = ae.n_params();
    let mut adam = Adam::new(n_params, cfg.adam);
    let mut params = Vec::new();
    ae.params_to(&mut params);

    let eval = |ae: &Autoencoder, d: &AeData<'_>| -> f64 {
        let set = if d.states.is_empty() { train.states } else { d.states };
        let next = if d.states.is_empty() { train.next } else { d.next };
        let idx: Vec<usize> = (0..set.len()).collect();
        let per = exec::map(&idx, |&i| {
            let mut scratch = Scratch::default();
            let pred = h.map(|h| {
                let (u, y) = &next.expect("checked above")[i];
                (h, u.as_slice(), y.as_slice())
            });
            ae.forward_loss(&set[i], pred, &mut scratch)
        });
        per.iter().sum::<f64>() / set.len() as f64
    };

    let mut best = eval(&ae, &valid);
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.states.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::derived_rng(seed, STREAM_SHUFFLE, epoch as u64));
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let w = 1.0 / batch.len() as f64;
            let shard_len = batch.len().div_ceil(SHARDS);
            let shards: Vec<&[usize]> = batch.chunks(shard_len).collect();
            let results = exec::map(&shards, |shard| {
                let mut g = vec![0.0; n_params];
                let mut scratch = Scratch::default();
                let mut loss = 0.0;
                for &i in shard.iter() {
                    let pred = h.map(|h| {
                        let (u, y) = &train.next.expect("checked above")[i];
                        (h, u.as_slice(), y.as_slice())
                    });
                    loss += ae.accumulate(&train.states[i], pred, w, &mut g, &mut scratch);
                }
                (loss, g)
            });
            let mut grads = vec![0.0; n_params];
            for (loss, g) in results {
                epoch_sum += loss;
                grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !clip_grad_norm(&mut grads, cfg.grad_clip).is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite autoencoder gradient".into(),
                });
            }
            adam.step(&mut params, &grads)?;
            ae.set_params(&params);
        }
        let train_loss = epoch_sum / train.states.len() as f64;
        let valid_loss = eval(&ae, &valid);
        if !train_loss.is_finite() || !valid_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "non-finite autoencoder loss".into(),
            });
        }
        if valid_loss < best {
            best = valid_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
        }
        if epoch % 100 == 0 {
            log::info!("autoencoder n={latent_dim} epoch {epoch}: train {train_loss:.4e}, best valid {best:.4e}");
        }
        records.push(AeEpochRecord {
            epoch,
            train_loss,
            valid_loss,
        });
    }
    ae.set_params(&best_params);
    Ok((
        ae,
        AeReport {
            epochs: records,
            best_epoch,
            best_valid_loss: best,
        },
    ))
}

impl Autoencoder {
    fn forward_loss(
        &self,
        z: &[f64],
        predictor: Option<(&Mlp, &[f64], &[f64])>,
        scratch: &mut Scratch,
    ) -> f64 {
        let l = self.spec.state_dim();
        self.encoder.forward_traced(z, &mut scratch.enc);
        self.decoder.forward_traced(scratch.enc.output(), &mut scratch.dec);
        let recon = scratch.dec.output();
        let mut loss: f64 = recon.iter().zip(z).map(|(r, t)| (r - t) * (r - t)).sum::<f64>() / l as f64;
        if let Some((h, u, y)) = predictor {
            scratch.h_input.clear();
            scratch.h_input.extend_from_slice(recon);
            scratch.h_input.extend_from_slice(u);
            let p = h.eval(&scratch.h_input, &mut scratch.h);
            loss += p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> StateMapSpec {
        StateMapSpec::new(3, 1, 1).unwrap()
    }

    #[test]
    fn latent_dims() {
        assert_eq!(latent_dim_for_rate(40, 0.6), 16);
        assert_eq!(latent_dim_for_rate(40, 0.0), 40);
        assert_eq!(latent_dim_for_rate(10, 1.0), 1);
        assert_eq!(latent_dim_for_rate(20, 0.15), 17);
    }

    #[test]
    fn collect_counts() {
        let t = Trajectory {
            id: "a".into(),
            dt: 1.0,
            inputs: (0..200).map(|i| vec![i as f64]).collect(),
            outputs: (0..200).map(|i| vec![-(i as f64)]).collect(),
            true_states: None,
        };
        let s = StateMapSpec::new(10, 1, 1).unwrap();
        let states = collect_states(&[t], &s, &Normalization::identity(1, 1));
        assert_eq!(states.len(), 191);
        assert!(states.iter().all(|z| z.len() == 20));
        assert_eq!(states[5][..4], [5.0, -5.0, 6.0, -6.0]);
    }

    #[test]
    fn identity_reconstructs_exactly() {
        let ae = Autoencoder::identity(spec()).unwrap();
        let z = vec![0.1, -2.0, 3.5, 0.0, 1e-3, 7.0];
        assert_eq!(ae.decode(&ae.encode(&z).unwrap()).unwrap(), z);
        assert_eq!(ae.reconstruction_mse(&[z]).unwrap(), 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let ae = Autoencoder::new(spec(), 2, &[5], Activation::Tanh, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("autoencoder.json");
        ae.save(&p).unwrap();
        assert_eq!(Autoencoder::load(&p).unwrap(), ae);
    }

    #[test]
    fn oversized_latent_rejected() {
        assert!(Autoencoder::new(spec(), 7, &[4], Activation::Tanh, 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let states: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..6).map(|j| ((i * 7 + j) as f64 * 0.13).sin()).collect())
            .collect();
        let cfg = AeTrainConfig {
            epochs: 5,
            hidden: vec![8],
            batch_size: 16,
            adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            ..AeTrainConfig::default()
        };
        let run = || {
            let d = AeData {
                states: &states,
                next: None,
            };
            let v = AeData {
                states: &states[..10],
                next: None,
            };
            train_autoencoder(spec(), d, v, 3, &cfg, None, 4).unwrap()
        };
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.epochs.last().unwrap().train_loss < ra.epochs[0].train_loss);
    }
}
