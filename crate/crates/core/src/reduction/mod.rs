//! Autoencoder compression of the window state.
//!
//! The reduced model keeps a latent `x = E(z)` and steps it through the full-size shift
//! model: `y = H(D(x), u)`, `x' = E(shift(D(x), u, y))`.

mod autoencoder;

use std::path::Path;

use serde::Serialize;

pub use autoencoder::{
    collect_states, latent_dim_for_rate, reconstruction_gradient, train_autoencoder, AeData, AeEpochRecord,
    AeReport, AeTrainConfig, Autoencoder, AUTOENCODER_FORMAT_VERSION,
};

use crate::datagen::Dataset;
use crate::nn::Trace;
use crate::regressor::{csv_error, evaluate_rollout, shift_in_place, Forecaster, RegressorModel, StateMapSpec};
use crate::{seed, Error, Result};

const STREAM_SWEEP: u64 = 23;

/// An output map paired with an autoencoder over its window state.
#[derive(Debug, Clone, Copy)]
pub struct ReducedModel<'a> {
    model: &'a RegressorModel,
    ae: &'a Autoencoder,
}

impl<'a> ReducedModel<'a> {
    pub fn new(model: &'a RegressorModel, ae: &'a Autoencoder) -> Result<Self> {
        if model.spec() != ae.spec() {
            return Err(Error::Usage(format!(
                "autoencoder was built for {:?} but the model uses {:?}",
                ae.spec(),
                model.spec()
            )));
        }
        Ok(Self { model, ae })
    }
}

impl Forecaster for ReducedModel<'_> {
    fn spec(&self) -> &StateMapSpec {
        self.model.spec()
    }

    fn forecast(
        &self,
        init_inputs: &[Vec<f64>],
        init_outputs: &[Vec<f64>],
        inputs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        reduced_rollout(self.model, self.ae, init_inputs, init_outputs, inputs)
    }
}

/// Free-run prediction through the latent state, raw units in and out.
pub fn reduced_rollout(
    model: &RegressorModel,
    ae: &Autoencoder,
    init_inputs: &[Vec<f64>],
    init_outputs: &[Vec<f64>],
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let spec = model.spec();
    if spec != ae.spec() {
        return Err(Error::Usage("autoencoder and model window specs differ".into()));
    }
    let norm = model.normalization();
    let z0 = model.initial_state(init_inputs, init_outputs)?;
    let (mut te, mut td, mut th) = (Trace::default(), Trace::default(), Trace::default());
    let mut x = ae.encoder().eval(&z0, &mut te).to_vec();
    let mut z = vec![0.0; spec.state_dim()];
    let mut h_in = Vec::with_capacity(spec.input_dim());
    let mut u_norm = vec![0.0; spec.n_u];
    let mut out = Vec::with_capacity(inputs.len());
    for u in inputs {
        if u.len() != spec.n_u {
            return Err(Error::shape("rollout input", spec.n_u, u.len()));
        }
        norm.normalize_u_into(u, &mut u_norm);
        z.copy_from_slice(ae.decoder().eval(&x, &mut td));
        h_in.clear();
        h_in.extend_from_slice(&z);
        h_in.extend_from_slice(&u_norm);
        let y = model.net().eval(&h_in, &mut th);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("reduced rollout prediction".into()));
        }
        out.push(norm.denormalize_y(y));
        shift_in_place(spec, &mut z, &u_norm, y);
        x.copy_from_slice(ae.encoder().eval(&z, &mut te));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub window_size: usize,
    pub rate: f64,
    pub latent_dim: usize,
    pub recon_mse: f64,
    pub rollout_mse: f64,
}

/// One sweep cell: its row, and the trained autoencoder unless the cell failed.
#[derive(Debug)]
pub struct SweepCell {
    pub row: SweepRow,
    pub autoencoder: Option<Autoencoder>,
}

/// Train one autoencoder per compression rate for `model` and score it: reconstruction
/// MSE on the test split's (normalized) states and reduced free-run MSE over `horizon`.
///
/// A failing cell is logged and reported with NaN errors; the sweep continues.
pub fn compression_sweep(
    model: &RegressorModel,
    dataset: &Dataset,
    rates: &[f64],
    cfg: &AeTrainConfig,
    horizon: usize,
    seed: u64,
) -> Result<Vec<SweepCell>> {
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Config(format!("compression rate {r} is outside [0, 1]")));
    }
    let spec = *model.spec();
    let norm = model.normalization();
    let train_states = collect_states(&dataset.train, &spec, norm);
    let valid_states = collect_states(&dataset.valid, &spec, norm);
    let test_states = collect_states(&dataset.test, &spec, norm);
    let (train_next, valid_next) = if cfg.joint {
        type Next = Vec<(Vec<f64>, Vec<f64>)>;
        let split = |v: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>| -> (Vec<Vec<f64>>, Next) {
            v.into_iter().map(|(z, u, y)| (z, (u, y))).unzip()
        };
        (
            Some(split(autoencoder::collect_transitions(&dataset.train, &spec, norm))),
            Some(split(autoencoder::collect_transitions(&dataset.valid, &spec, norm))),
        )
    } else {
        (None, None)
    };

    let mut cells = Vec::with_capacity(rates.len());
    for &rate in rates {
        let latent = latent_dim_for_rate(spec.state_dim(), rate);
        let cell_seed = seed::derive(seed, STREAM_SWEEP, ((spec.ell as u64) << 32) | (rate * 1e4).round() as u64);
        let (train, valid) = match (&train_next, &valid_next) {
            (Some((tz, tn)), Some((vz, vn))) => (
                AeData {
                    states: tz,
                    next: Some(tn),
                },
                AeData {
                    states: vz,
                    next: Some(vn),
                },
            ),
            _ => (
                AeData {
                    states: &train_states,
                    next: None,
                },
                AeData {
                    states: &valid_states,
                    next: None,
                },
            ),
        };
        let result = train_autoencoder(spec, train, valid, latent, cfg, Some(model), cell_seed).and_then(|(ae, _)| {
            let recon = ae.reconstruction_mse(&test_states)?;
            let rollout = evaluate_rollout(&ReducedModel::new(model, &ae)?, &dataset.test, horizon)?.mean_mse();
            Ok((ae, recon, rollout))
        });
        let cell = match result {
            Ok((ae, recon_mse, rollout_mse)) => SweepCell {
                row: SweepRow {
                    window_size: spec.ell,
                    rate,
                    latent_dim: latent,
                    recon_mse,
                    rollout_mse,
                },
                autoencoder: Some(ae),
            },
            Err(e) => {
                log::error!("sweep cell ell={} rate={rate}: {e}", spec.ell);
                SweepCell {
                    row: SweepRow {
                        window_size: spec.ell,
                        rate,
                        latent_dim: latent,
                        recon_mse: f64::NAN,
                        rollout_mse: f64::NAN,
                    },
                    autoencoder: None,
                }
            }
        };
        cells.push(cell);
    }
    Ok(cells)
}

/// `window_size,rate,latent_dim,recon_mse,rollout_mse`.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Normalization, Trajectory};
    use crate::nn::Activation;

    fn model() -> RegressorModel {
        let spec = StateMapSpec::new(3, 1, 1).unwrap();
        let norm = Normalization {
            u_mean: vec![0.3],
            u_std: vec![1.7],
            y_mean: vec![-0.2],
            y_std: vec![0.9],
        };
        RegressorModel::new(spec, &[6, 6], Activation::Tanh, norm, 5).unwrap()
    }

    #[test]
    fn identity_autoencoder_matches_plain_rollout() {
        let m = model();
        let ae = Autoencoder::identity(*m.spec()).unwrap();
        let init_u: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 * 0.5]).collect();
        let init_y: Vec<Vec<f64>> = (0..3).map(|i| vec![1.0 - i as f64]).collect();
        let inputs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.3).cos()]).collect();
        let plain = m.rollout(&init_u, &init_y, &inputs).unwrap();
        let reduced = reduced_rollout(&m, &ae, &init_u, &init_y, &inputs).unwrap();
        assert_eq!(plain, reduced);
        assert_eq!(reduced.len(), 40);
    }

    #[test]
    fn spec_mismatch_rejected() {
        let m = model();
        let ae = Autoencoder::identity(StateMapSpec::new(2, 1, 1).unwrap()).unwrap();
        assert!(matches!(ReducedModel::new(&m, &ae), Err(Error::Usage(_))));
        assert!(reduced_rollout(&m, &ae, &[], &[], &[]).is_err());
    }

    #[test]
    fn sweep_rows_and_csv() {
        let m = model();
        let traj = |id: &str| Trajectory {
            id: id.into(),
            dt: 1.0,
            inputs: (0..20).map(|i| vec![(i as f64).sin()]).collect(),
            outputs: (0..20).map(|i| vec![(i as f64 * 0.5).cos()]).collect(),
            true_states: None,
        };
        let ds = Dataset::new(
            crate::datagen::SystemKind::Tank,
            1,
            1,
            1.0,
            vec![traj("a"), traj("b")],
            vec![traj("c")],
            vec![traj("d")],
        )
        .unwrap();
        let cfg = AeTrainConfig {
            epochs: 2,
            hidden: vec![4],
            ..AeTrainConfig::default()
        };
        let rates = [0.15, 0.3, 0.45, 0.6, 0.75, 0.9];
        let cells = compression_sweep(&m, &ds, &rates, &cfg, 10, 0).unwrap();
        assert_eq!(cells.len(), 6);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sweep.csv");
        let rows: Vec<SweepRow> = cells.into_iter().map(|c| c.row).collect();
        write_sweep_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "window_size,rate,latent_dim,recon_mse,rollout_mse");
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn sweep_rejects_bad_rate() {
        let m = model();
        let ds = Dataset::new(crate::datagen::SystemKind::Tank, 1, 1, 1.0, vec![], vec![], vec![]);
        if let Ok(ds) = ds {
            assert!(compression_sweep(&m, &ds, &[1.5], &AeTrainConfig::default(), 10, 0).is_err());
        }
    }
}
