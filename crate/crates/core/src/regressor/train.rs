use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{segment_loss, FIRST_STEP_WEIGHT};
use super::model::{RegressorModel, Series};
use super::state::StateMapSpec;
use crate::datagen::Dataset;
use crate::nn::{clip_grad_norm, Activation, Adam, AdamConfig, GRAD_CLIP_NORM};
use crate::{exec, seed, Error, Result};

const STREAM_INIT: u64 = 11;
const STREAM_SHUFFLE: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    /// Steps per truncated backpropagation window.
    pub chunk_len: usize,
    /// Trajectories per minibatch.
    pub batch_size: usize,
    pub first_weight: f64,
    pub grad_clip: f64,
    /// Validate every this many epochs (and always after the last).
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            hidden: vec![256, 256, 256],
            activation: Activation::Tanh,
            adam: AdamConfig::default(),
            chunk_len: 100,
            batch_size: 10,
            first_weight: FIRST_STEP_WEIGHT,
            grad_clip: GRAD_CLIP_NORM,
            validate_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_len == 0 || self.batch_size == 0 || self.validate_every == 0 {
            return Err(Error::Config(
                "chunk_len, batch_size and validate_every must be >= 1".into(),
            ));
        }
        if !(self.adam.lr > 0.0) || !(self.grad_clip > 0.0) || !(self.first_weight >= 0.0) {
            return Err(Error::Config(
                "learning rate and gradient clip must be positive, first_weight non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based; 0 means the initial parameters).
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// `epoch,train_loss,valid_loss` with an empty cell on epochs without validation.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for rec in &self.epochs {
            w.serialize(rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Usage(format!("{}: CSV error: {other:?}", path.display())),
    }
}

/// Mean loss `J` over `series` with the current parameters.
pub(crate) fn mean_loss(model: &RegressorModel, series: &[Series], first_weight: f64) -> f64 {
    let spec = model.spec();
    let losses = exec::map(series, |s| {
        let mut z = s.window(spec, 0);
        let sum = segment_loss(model.net(), spec, s, &mut z, spec.ell..s.len, first_weight, None);
        sum * (1.0 / (s.len - spec.ell) as f64)
    });
    losses.iter().sum::<f64>() / losses.len() as f64
}

fn usable(ds_split: &[crate::datagen::Trajectory], spec: &StateMapSpec, model: &RegressorModel) -> Vec<Series> {
    ds_split
        .iter()
        .filter(|t| {
            let ok = t.len() > spec.ell;
            if !ok {
                log::warn!("skipping trajectory {}: {} steps is too short for ell = {}", t.id, t.len(), spec.ell);
            }
            ok
        })
        .map(|t| Series::new(t, model.normalization()))
        .collect()
}

/// Fit the output map by minimizing the mean output-error loss over the train split.
///
/// Minibatches of trajectories are rolled out in lockstep; every `chunk_len` steps the
/// accumulated gradient is clipped and applied with Adam, and the rollout continues
/// from the carried state. The parameters with the lowest validation loss are returned.
pub fn train_regressor(
    dataset: &Dataset,
    spec: StateMapSpec,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(RegressorModel, TrainReport)> {
    cfg.validate()?;
    if spec.n_u != dataset.n_u || spec.n_y != dataset.n_y {
        return Err(Error::Config("window spec channels do not match the dataset".into()));
    }
    let mut model = RegressorModel::new(
        spec,
        &cfg.hidden,
        cfg.activation,
        dataset.normalization.clone(),
        seed::derive(seed, STREAM_INIT, 0),
    )?;
    let train = usable(&dataset.train, &spec, &model);
    if train.is_empty() {
        return Err(Error::Usage(format!(
            "no training trajectory is longer than ell = {}",
            spec.ell
        )));
    }
    let valid = usable(&dataset.valid, &spec, &model);
    let select_on = if valid.is_empty() { &train } else { &valid };

    let n_params = model.net().n_params();
    let mut adam = Adam::new(n_params, cfg.adam);
    let mut best_valid = mean_loss(&model, select_on, cfg.first_weight);
    let mut best_params = model.net().params().to_vec();
    let mut best_epoch = 0;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::derived_rng(seed, STREAM_SHUFFLE, epoch as u64));
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut states: Vec<Vec<f64>> = batch.iter().map(|&i| train[i].window(&spec, 0)).collect();
            let longest = batch.iter().map(|&i| train[i].len).max().unwrap_or(0);
            let mut start = spec.ell;
            while start < longest {
                let end = start + cfg.chunk_len;
                let jobs: Vec<(usize, Vec<f64>)> = batch.iter().copied().zip(states.drain(..)).collect();
                let net = model.net();
                let results = exec::map(&jobs, |(i, z)| {
                    let s = &train[*i];
                    let mut z = z.clone();
                    if start >= s.len {
                        return (0.0, None, z);
                    }
                    let steps = s.len - spec.ell;
                    let scale = 1.0 / (steps * batch.len()) as f64;
                    let mut g = vec![0.0; n_params];
                    let sum = segment_loss(
                        net,
                        &spec,
                        s,
                        &mut z,
                        start..end.min(s.len),
                        cfg.first_weight,
                        Some((&mut g, scale)),
                    );
                    (sum / steps as f64, Some(g), z)
                });
                let mut grads = vec![0.0; n_params];
                for (loss, g, z) in results {
                    epoch_sum += loss;
                    if let Some(g) = g {
                        grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    }
                    states.push(z);
                }
                let norm = clip_grad_norm(&mut grads, cfg.grad_clip);
                if !norm.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        reason: "non-finite gradient".into(),
                    });
                }
                adam.step(model.net_mut().params_mut(), &grads)?;
                start = end;
            }
        }
        let train_loss = epoch_sum / train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "non-finite training loss".into(),
            });
        }
        let valid_loss = if epoch % cfg.validate_every == 0 || epoch == cfg.epochs {
            let v = mean_loss(&model, select_on, cfg.first_weight);
            if !v.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite validation loss".into(),
                });
            }
            if v < best_valid {
                best_valid = v;
                best_epoch = epoch;
                best_params.copy_from_slice(model.net().params());
            }
            Some(v)
        } else {
            None
        };
        log::debug!("epoch {epoch}: train {train_loss:.6e} valid {valid_loss:?}");
        if epoch % 100 == 0 {
            log::info!("ell {} epoch {epoch}: train {train_loss:.4e}, best valid {best_valid:.4e}", spec.ell);
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
        });
    }
    model.net_mut().params_mut().copy_from_slice(&best_params);
    Ok((
        model,
        TrainReport {
            epochs: records,
            best_epoch,
            best_valid_loss: best_valid,
        },
    ))
}
