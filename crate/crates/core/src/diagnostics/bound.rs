use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{dist, estimate_alpha, estimate_lipschitz, invert_state, iterate_unchecked, observe_unchecked};
use super::{BoxSet, InversionConfig};
use crate::json::write_pretty;
use crate::regressor::csv_error;
use crate::systems::DynamicalSystem;
use crate::{exec, seed, Error, Result};

const STREAM_TRIAL: u64 = 34;
const STREAM_CONSTANTS: u64 = 35;

/// Slack on `error <= bound` for the inversion's finite refinement.
const SOLVER_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundCheckConfig {
    pub ell: usize,
    /// Standard deviation of the Gaussian output noise.
    pub noise_sigma: f64,
    pub n_trials: usize,
    pub states: BoxSet,
    pub inputs: BoxSet,
    /// Samples for each of the two constants.
    pub constant_samples: usize,
    pub inversion: InversionConfig,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            ell: 5,
            noise_sigma: 0.01,
            n_trials: 200,
            states: BoxSet::tank_states(),
            inputs: BoxSet::tank_inputs(),
            constant_samples: 100_000,
            inversion: InversionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub trial: usize,
    /// `|x_hat_t - x_t|`.
    pub state_error: f64,
    /// `|w|` over the stacked window noise.
    pub noise_norm: f64,
    /// `2 gamma^ell / alpha * |w|`; absent when the system looks unobservable.
    pub bound: Option<f64>,
    pub satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub ell: usize,
    pub noise_sigma: f64,
    /// Max sampled quotient: a lower bound on the Lipschitz constant.
    pub gamma_f_hat: f64,
    /// Min sampled quotient: an upper bound on the observability constant.
    pub alpha_ell_hat: f64,
    /// False when `alpha_ell_hat` is 0; no bound is computed then.
    pub observable: bool,
    pub satisfied_fraction: Option<f64>,
    pub samples: Vec<BoundSample>,
}

impl DiagnosticsReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_pretty(path, self)
    }

    /// `trial,state_error,noise_norm,bound,satisfied`; blank cells when unobservable.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for s in &self.samples {
            w.serialize(s).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Monte Carlo check of `|x_hat_t - x_t| <= 2 gamma^ell / alpha * |w|`.
///
/// Each trial draws `x_{t-ell}` from the state box and `ell` inputs from the input box,
/// simulates the window, adds Gaussian noise to the outputs, inverts, and compares the
/// propagated estimate with the true end state.
pub fn check_error_bound<S: DynamicalSystem + ?Sized>(
    sys: &S,
    cfg: &BoundCheckConfig,
    seed: u64,
) -> Result<DiagnosticsReport> {
    if cfg.ell == 0 || cfg.n_trials == 0 || cfg.constant_samples == 0 {
        return Err(Error::Config("ell, trials and constant samples must be >= 1".into()));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be finite and >= 0, got {}", cfg.noise_sigma)));
    }
    let gamma = estimate_lipschitz(
        sys,
        &cfg.states,
        &cfg.inputs,
        cfg.constant_samples,
        seed::derive(seed, STREAM_CONSTANTS, 0),
    )?;
    let alpha = estimate_alpha(
        sys,
        cfg.ell,
        &cfg.states,
        &cfg.inputs,
        cfg.constant_samples,
        seed::derive(seed, STREAM_CONSTANTS, 1),
    )?;
    let observable = alpha > 0.0;
    if !observable {
        log::warn!("sampled observability constant is 0 at ell={}: no bound computed", cfg.ell);
    }
    let factor = 2.0 * gamma.powi(cfg.ell as i32) / alpha;
    let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let trials = exec::map_range(cfg.n_trials, |trial| -> Result<BoundSample> {
        let mut rng = seed::derived_rng(seed, STREAM_TRIAL, trial as u64);
        let x0 = cfg.states.sample(&mut rng);
        let us: Vec<Vec<f64>> = (0..cfg.ell).map(|_| cfg.inputs.sample(&mut rng)).collect();
        let clean = observe_unchecked(sys, &x0, &us);
        let noise: Vec<f64> = clean.iter().map(|_| normal.sample(&mut rng)).collect();
        let noise_norm = noise.iter().map(|w| w * w).sum::<f64>().sqrt();
        let measured: Vec<Vec<f64>> = clean
            .iter()
            .zip(&noise)
            .map(|(y, w)| y + w)
            .collect::<Vec<_>>()
            .chunks(sys.output_dim())
            .map(<[f64]>::to_vec)
            .collect();
        let inv = invert_state(sys, &measured, &us, &cfg.states, &cfg.inversion)?;
        let x_end = iterate_unchecked(sys, &x0, &us);
        let state_error = dist(&inv.x_end, &x_end);
        let bound = observable.then_some(factor * noise_norm);
        Ok(BoundSample {
            trial,
            state_error,
            noise_norm,
            bound,
            satisfied: bound.map(|b| state_error <= b + SOLVER_SLACK),
        })
    });
    let samples = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let satisfied_fraction = observable
        .then(|| samples.iter().filter(|s| s.satisfied == Some(true)).count() as f64 / samples.len() as f64);
    Ok(DiagnosticsReport {
        ell: cfg.ell,
        noise_sigma: cfg.noise_sigma,
        gamma_f_hat: gamma,
        alpha_ell_hat: alpha,
        observable,
        satisfied_fraction,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FnSystem, Tank, TankParams};

    fn quick(sigma: f64) -> BoundCheckConfig {
        BoundCheckConfig {
            n_trials: 20,
            noise_sigma: sigma,
            constant_samples: 20_000,
            ..BoundCheckConfig::default()
        }
    }

    fn tank() -> Tank {
        Tank {
            params: TankParams::default(),
        }
    }

    #[test]
    fn noiseless_trials_recover_state() {
        let r = check_error_bound(&tank(), &quick(0.0), 1).unwrap();
        assert!(r.samples.iter().all(|s| s.state_error <= 1e-2 && s.noise_norm == 0.0));
    }

    #[test]
    fn bound_is_formula_and_holds() {
        let r = check_error_bound(&tank(), &quick(0.01), 2).unwrap();
        assert!(r.gamma_f_hat > 0.0 && r.alpha_ell_hat > 0.0);
        for s in &r.samples {
            let b = 2.0 * r.gamma_f_hat.powi(5) / r.alpha_ell_hat * s.noise_norm;
            assert_eq!(s.bound, Some(b));
        }
        assert_eq!(r.satisfied_fraction, Some(1.0));
    }

    #[test]
    fn unobservable_has_no_bound() {
        let sys = FnSystem {
            state_dim: 1,
            input_dim: 1,
            output_dim: 1,
            f: |x: &[f64], _u: &[f64]| x.to_vec(),
            h: |_x: &[f64], _u: &[f64]| vec![0.0],
        };
        let cfg = BoundCheckConfig {
            ell: 2,
            states: BoxSet::cube(1, 0.0, 1.0).unwrap(),
            inputs: BoxSet::cube(1, 0.0, 1.0).unwrap(),
            n_trials: 3,
            constant_samples: 100,
            ..BoundCheckConfig::default()
        };
        let r = check_error_bound(&sys, &cfg, 0).unwrap();
        assert!(!r.observable);
        assert_eq!(r.satisfied_fraction, None);
        assert!(r.samples.iter().all(|s| s.bound.is_none()));
    }

    #[test]
    fn report_files() {
        let r = check_error_bound(&tank(), &quick(0.01), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(&dir.path().join("d.json")).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
        for k in ["gamma_f_hat", "alpha_ell_hat", "samples", "satisfied_fraction"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let s = &v["samples"][0];
        for k in ["state_error", "noise_norm", "bound", "satisfied"] {
            assert!(s.get(k).is_some(), "{k}");
        }
        r.write_csv(&dir.path().join("d.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "trial,state_error,noise_norm,bound,satisfied");
        assert_eq!(text.lines().count(), 21);
    }
}
