//! Numerical probes of the conditions under which a window of past inputs and outputs
//! determines the state: Lipschitz constants of the dynamics, observability constants of
//! the stacked output map, state inversion from noisy windows, and a Monte Carlo check of
//! the resulting estimation error bound `2 gamma^ell / alpha * |w|`.
//!
//! The constants are sampled, not computed: `gamma` is a max over sampled quotients (a
//! lower bound on the true constant) and `alpha` a min (an upper bound). All norms are
//! Euclidean.

mod bound;
mod invert;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bound::{check_error_bound, BoundCheckConfig, BoundSample, DiagnosticsReport};
pub use invert::{grid_coord, invert_state, Inversion, InversionConfig};

use crate::systems::DynamicalSystem;
use crate::{exec, seed, Error, Result};

const STREAM_LIPSCHITZ: u64 = 31;
const STREAM_ALPHA: u64 = 32;
const STREAM_ITERATE: u64 = 33;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    /// Same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::Config("box bounds must be non-empty and of equal length".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Config(format!(
                "box must be finite and non-degenerate, got lo={:?} hi={:?}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| rng.random_range(l..=h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Lower-tank-safe state box of the cascaded tanks: `[0.1, 5]^2` (the square root in
    /// the dynamics is not Lipschitz at 0).
    pub fn tank_states() -> Self {
        Self::cube(2, 0.1, 5.0).expect("valid box")
    }

    pub fn tank_inputs() -> Self {
        Self::cube(1, 0.0, 5.0).expect("valid box")
    }
}

fn check_dims<S: DynamicalSystem + ?Sized>(sys: &S, x: &[f64], inputs: &[Vec<f64>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Usage("at least one input is required".into()));
    }
    if x.len() != sys.state_dim() {
        return Err(Error::shape("state", sys.state_dim(), x.len()));
    }
    if let Some(u) = inputs.iter().find(|u| u.len() != sys.input_dim()) {
        return Err(Error::shape("input", sys.input_dim(), u.len()));
    }
    Ok(())
}

fn iterate_unchecked<S: DynamicalSystem + ?Sized>(sys: &S, x: &[f64], inputs: &[Vec<f64>]) -> Vec<f64> {
    let mut x = x.to_vec();
    for u in inputs {
        x = sys.step(&x, u);
    }
    x
}

fn observe_unchecked<S: DynamicalSystem + ?Sized>(sys: &S, x: &[f64], inputs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inputs.len() * sys.output_dim());
    let mut x = x.to_vec();
    for (k, u) in inputs.iter().enumerate() {
        out.extend(sys.observe(&x, u));
        if k + 1 < inputs.len() {
            x = sys.step(&x, u);
        }
    }
    out
}

/// `F_i(x, u_1..u_i)`: the state after applying `inputs` in order.
pub fn iterate_dynamics<S: DynamicalSystem + ?Sized>(sys: &S, x: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_dims(sys, x, inputs)?;
    Ok(iterate_unchecked(sys, x, inputs))
}

/// `O_i(x, u_1..u_i)`: outputs `h(x, u_1), h(F_1, u_2), ..., h(F_{i-1}, u_i)` stacked.
pub fn observability_map<S: DynamicalSystem + ?Sized>(sys: &S, x: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_dims(sys, x, inputs)?;
    Ok(observe_unchecked(sys, x, inputs))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_boxes<S: DynamicalSystem + ?Sized>(sys: &S, states: &BoxSet, inputs: &BoxSet) -> Result<()> {
    states.validate()?;
    if states.dim() != sys.state_dim() {
        return Err(Error::shape("state box", sys.state_dim(), states.dim()));
    }
    if inputs.dim() != sys.input_dim() {
        return Err(Error::shape("input box", sys.input_dim(), inputs.dim()));
    }
    if inputs.lo.iter().zip(&inputs.hi).any(|(l, h)| l > h) {
        return Err(Error::Config("input box has lo > hi".into()));
    }
    Ok(())
}

/// Max over sampled `(x, x', u)` of `|f(x,u) - f(x',u)| / |x - x'|`.
pub fn estimate_lipschitz<S: DynamicalSystem + ?Sized>(
    sys: &S,
    states: &BoxSet,
    inputs: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_boxes(sys, states, inputs)?;
    if n_samples == 0 {
        return Err(Error::Usage("at least one sample is required".into()));
    }
    let q = exec::map_range(n_samples, |k| {
        let mut rng = seed::derived_rng(seed, STREAM_LIPSCHITZ, k as u64);
        let (x, xp, u) = (states.sample(&mut rng), states.sample(&mut rng), inputs.sample(&mut rng));
        let d = dist(&x, &xp);
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        dist(&sys.step(&x, &u), &sys.step(&xp, &u)) / d
    });
    Ok(q.into_iter().fold(0.0, f64::max))
}

/// Min over sampled `(x, x', u_1..u_ell)` of `|O_ell(x,u) - O_ell(x',u)| / |x - x'|`.
pub fn estimate_alpha<S: DynamicalSystem + ?Sized>(
    sys: &S,
    ell: usize,
    states: &BoxSet,
    inputs: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_boxes(sys, states, inputs)?;
    if ell == 0 || n_samples == 0 {
        return Err(Error::Usage("ell and the sample count must be >= 1".into()));
    }
    let q = exec::map_range(n_samples, |k| {
        let mut rng = seed::derived_rng(seed, STREAM_ALPHA, k as u64);
        let (x, xp) = (states.sample(&mut rng), states.sample(&mut rng));
        let us: Vec<Vec<f64>> = (0..ell).map(|_| inputs.sample(&mut rng)).collect();
        let d = dist(&x, &xp);
        if d == 0.0 {
            return f64::INFINITY;
        }
        dist(&observe_unchecked(sys, &x, &us), &observe_unchecked(sys, &xp, &us)) / d
    });
    Ok(q.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateLipschitzRow {
    pub i: usize,
    /// Max sampled quotient of `F_i`.
    pub quotient: f64,
    /// `gamma_hat^i`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateLipschitzTable {
    /// Max one-step quotient over every consecutive pair along the sampled chains.
    pub gamma_hat: f64,
    pub rows: Vec<IterateLipschitzRow>,
}

/// Compare the sampled Lipschitz quotient of `F_i` with `gamma_hat^i` for `i = 1..=i_max`.
///
/// Each sample runs two states through the same `i_max` inputs. `gamma_hat` is the max
/// of the one-step quotients over every consecutive pair of the chains, so the `F_i`
/// quotient (a product of `i` of them) can never exceed `gamma_hat^i`.
pub fn check_iterate_lipschitz<S: DynamicalSystem + ?Sized>(
    sys: &S,
    i_max: usize,
    states: &BoxSet,
    inputs: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> Result<IterateLipschitzTable> {
    check_boxes(sys, states, inputs)?;
    if i_max == 0 || n_samples == 0 {
        return Err(Error::Usage("i_max and the sample count must be >= 1".into()));
    }
    // Per sample: (max one-step quotient, F_i quotient for each i).
    let per = exec::map_range(n_samples, |k| {
        let mut rng = seed::derived_rng(seed, STREAM_ITERATE, k as u64);
        let (mut x, mut xp) = (states.sample(&mut rng), states.sample(&mut rng));
        let d0 = dist(&x, &xp);
        let mut step_max: f64 = 0.0;
        let mut q = Vec::with_capacity(i_max);
        for _ in 0..i_max {
            let u = inputs.sample(&mut rng);
            let before = dist(&x, &xp);
            x = sys.step(&x, &u);
            xp = sys.step(&xp, &u);
            let after = dist(&x, &xp);
            if before > 0.0 {
                step_max = step_max.max(after / before);
            }
            q.push(if d0 > 0.0 { after / d0 } else { 0.0 });
        }
        (step_max, q)
    });
    let gamma_hat = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let rows = (0..i_max)
        .map(|i| {
            let quotient = per.iter().map(|p| p.1[i]).fold(0.0, f64::max);
            let bound = gamma_hat.powi(i as i32 + 1);
            IterateLipschitzRow {
                i: i + 1,
                quotient,
                bound,
                holds: quotient <= bound * (1.0 + 1e-6),
            }
        })
        .collect();
    Ok(IterateLipschitzTable { gamma_hat, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FnSystem, Tank, TankParams};

    fn scaled(c: f64) -> impl DynamicalSystem {
        FnSystem {
            state_dim: 1,
            input_dim: 1,
            output_dim: 1,
            f: move |x: &[f64], _u: &[f64]| vec![c * x[0]],
            h: |x: &[f64], _u: &[f64]| vec![x[0]],
        }
    }

    fn tank() -> Tank {
        Tank {
            params: TankParams::default(),
        }
    }

    #[test]
    fn iterate_two_tank_steps() {
        let x = iterate_dynamics(&tank(), &[1.0, 1.0], &[vec![1.0], vec![1.0]]).unwrap();
        let s = 0.9f64.sqrt();
        assert!((x[0] - (0.9 - 0.5 * s + 0.4)).abs() < 1e-15);
        assert!((x[1] - (0.9 + 0.2 * s - 0.3 * s)).abs() < 1e-15);
        assert!((x[0] - 0.825658).abs() < 1e-6 && (x[1] - 0.805131).abs() < 1e-6);
    }

    #[test]
    fn observe_two_tank_steps() {
        let o = observability_map(&tank(), &[1.0, 1.0], &[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o[0], 1.0);
        assert!((o[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(iterate_dynamics(&tank(), &[1.0, 1.0], &[]).is_err());
    }

    #[test]
    fn linear_lipschitz() {
        let x = BoxSet::cube(1, -1.0, 1.0).unwrap();
        let u = BoxSet::cube(1, 0.0, 1.0).unwrap();
        assert!((estimate_lipschitz(&scaled(2.0), &x, &u, 500, 1).unwrap() - 2.0).abs() < 1e-9);
        assert!((estimate_lipschitz(&scaled(0.5), &x, &u, 500, 1).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identity_alpha_and_unobservable() {
        let x = BoxSet::cube(1, -1.0, 1.0).unwrap();
        let u = BoxSet::cube(1, 0.0, 1.0).unwrap();
        assert!((estimate_alpha(&scaled(1.0), 1, &x, &u, 500, 1).unwrap() - 1.0).abs() < 1e-12);
        let blind = FnSystem {
            state_dim: 1,
            input_dim: 1,
            output_dim: 1,
            f: |x: &[f64], _u: &[f64]| x.to_vec(),
            h: |_x: &[f64], _u: &[f64]| vec![0.0],
        };
        assert_eq!(estimate_alpha(&blind, 3, &x, &u, 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn iterate_lipschitz_linear() {
        let x = BoxSet::cube(1, -1.0, 1.0).unwrap();
        let u = BoxSet::cube(1, 0.0, 1.0).unwrap();
        let t = check_iterate_lipschitz(&scaled(0.5), 3, &x, &u, 100, 2).unwrap();
        assert!((t.gamma_hat - 0.5).abs() < 1e-15);
        assert!((t.rows[2].quotient - 0.125).abs() < 1e-15);
        assert!(t.rows.iter().all(|r| r.holds));
    }

    #[test]
    fn tank_estimates_reproducible() {
        let g1 = estimate_lipschitz(&tank(), &BoxSet::tank_states(), &BoxSet::tank_inputs(), 2000, 5).unwrap();
        let g2 = estimate_lipschitz(&tank(), &BoxSet::tank_states(), &BoxSet::tank_inputs(), 2000, 5).unwrap();
        assert_eq!(g1, g2);
        let a = estimate_alpha(&tank(), 10, &BoxSet::tank_states(), &BoxSet::tank_inputs(), 2000, 5).unwrap();
        assert!(a > 0.0);
    }

    #[test]
    fn bad_boxes() {
        assert!(BoxSet::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxSet::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let r = estimate_lipschitz(&tank(), &BoxSet::cube(3, 0.0, 1.0).unwrap(), &BoxSet::tank_inputs(), 10, 0);
        assert!(matches!(r, Err(Error::Shape { .. })));
    }
}
