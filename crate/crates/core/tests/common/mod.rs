#![allow(dead_code)]

use dynoid::datagen::{Normalization, Trajectory};
use dynoid::nn::{Activation, Mlp};
use dynoid::reduction::{reconstruction_gradient, Autoencoder};
use dynoid::regressor::{regression_loss, regression_loss_gradient, RegressorModel, StateMapSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

/// Central differences of `f` at `params`.
pub fn central_diff(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let up = f(&p);
            p[i] = orig - FD_STEP;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - b| / |b|` over the whole vector.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

pub fn random_trajectory(id: &str, len: usize, n_u: usize, n_y: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let inputs = (0..len).map(|_| row(n_u)).collect();
    let outputs = (0..len).map(|_| row(n_y)).collect();
    Trajectory {
        id: id.into(),
        dt: 1.0,
        inputs,
        outputs,
        true_states: None,
    }
}

/// Relative error of the regressor loss gradient through a `steps`-step rollout.
pub fn regressor_gradient_error(spec: StateMapSpec, hidden: &[usize], steps: usize, seed: u64) -> (usize, f64) {
    let norm = Normalization {
        u_mean: vec![0.1; spec.n_u],
        u_std: vec![0.8; spec.n_u],
        y_mean: vec![-0.2; spec.n_y],
        y_std: vec![1.3; spec.n_y],
    };
    let model = RegressorModel::new(spec, hidden, Activation::Tanh, norm, seed).unwrap();
    let traj = random_trajectory("fd", spec.ell + steps, spec.n_u, spec.n_y, seed + 1);
    let (_, analytic) = regression_loss_gradient(&model, &traj, 10.0, None).unwrap();
    let numeric = central_diff(model.net().params(), |p| {
        let mut m = model.clone();
        m.net_mut().params_mut().copy_from_slice(p);
        regression_loss(&m, &traj, 10.0).unwrap()
    });
    (model.net().n_params(), rel_error(&analytic, &numeric))
}

/// Relative error of the reconstruction loss gradient.
pub fn autoencoder_gradient_error(spec: StateMapSpec, latent: usize, hidden: &[usize], seed: u64) -> (usize, f64) {
    let ae = Autoencoder::new(spec, latent, hidden, Activation::Tanh, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let samples: Vec<Vec<f64>> = (0..7)
        .map(|_| (0..spec.state_dim()).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let (_, analytic) = reconstruction_gradient(&ae, &samples).unwrap();
    let n_enc = ae.encoder().n_params();
    let mut params = ae.encoder().params().to_vec();
    params.extend_from_slice(ae.decoder().params());
    let numeric = central_diff(&params, |p| {
        let mut enc: Mlp = ae.encoder().clone();
        let mut dec: Mlp = ae.decoder().clone();
        enc.params_mut().copy_from_slice(&p[..n_enc]);
        dec.params_mut().copy_from_slice(&p[n_enc..]);
        Autoencoder::from_parts(spec, enc, dec)
            .unwrap()
            .reconstruction_mse(&samples)
            .unwrap()
    });
    (params.len(), rel_error(&analytic, &numeric))
}
