use serde::{Deserialize, Serialize};

use super::{check_dims, dist, iterate_unchecked, observe_unchecked, BoxSet};
use crate::systems::DynamicalSystem;
use crate::{Error, Result};

/// Largest state dimension searched exhaustively.
const MAX_GRID_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// Grid points per axis for the exhaustive search.
    pub grid_points: usize,
    /// Coordinate-descent sweeps after the grid search.
    pub sweeps: usize,
    /// Start for the local search; required when the state has more than 3 dims.
    pub initial_guess: Option<Vec<f64>>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            grid_points: 201,
            sweeps: 50,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    /// Estimated state at the start of the window.
    pub x_start: Vec<f64>,
    /// `F_ell(x_start, u)`: the estimate propagated to the end of the window.
    pub x_end: Vec<f64>,
    /// `|y - O_ell(x_start, u)|`.
    pub residual: f64,
}

/// Least-squares state from a window of measured outputs: minimize `|y - O_ell(x, u)|`
/// over the box, by grid search then compass coordinate descent.
///
/// Grid ties go to the lowest lexicographic index (first axis most significant).
pub fn invert_state<S: DynamicalSystem + ?Sized>(
    sys: &S,
    outputs: &[Vec<f64>],
    inputs: &[Vec<f64>],
    states: &BoxSet,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    states.validate()?;
    let n_x = sys.state_dim();
    if states.dim() != n_x {
        return Err(Error::shape("state box", n_x, states.dim()));
    }
    check_dims(sys, &states.lo, inputs)?;
    if outputs.len() != inputs.len() {
        return Err(Error::Usage(format!(
            "{} output blocks for {} inputs",
            outputs.len(),
            inputs.len()
        )));
    }
    if let Some(y) = outputs.iter().find(|y| y.len() != sys.output_dim()) {
        return Err(Error::shape("measured output", sys.output_dim(), y.len()));
    }
    if cfg.grid_points < 2 {
        return Err(Error::Config("inversion grid needs at least 2 points per axis".into()));
    }
    let target: Vec<f64> = outputs.concat();
    let cost = |x: &[f64]| dist(&observe_unchecked(sys, x, inputs), &target);
    let spacing: Vec<f64> = (0..n_x)
        .map(|i| (states.hi[i] - states.lo[i]) / (cfg.grid_points - 1) as f64)
        .collect();

    let (mut x, mut best) = if n_x <= MAX_GRID_DIM {
        grid_search(states, cfg.grid_points, &cost)
    } else {
        let guess = cfg.initial_guess.as_ref().ok_or_else(|| {
            Error::Capability(format!(
                "state dimension {n_x} is too large for grid search; supply an initial guess"
            ))
        })?;
        if guess.len() != n_x {
            return Err(Error::shape("initial guess", n_x, guess.len()));
        }
        let x: Vec<f64> = guess
            .iter()
            .zip(states.lo.iter().zip(&states.hi))
            .map(|(&g, (&l, &h))| g.clamp(l, h))
            .collect();
        let c = cost(&x);
        (x, c)
    };

    let mut step = spacing;
    let mut trial = x.clone();
    for _ in 0..cfg.sweeps {
        if best == 0.0 {
            break;
        }
        let mut improved = false;
        for i in 0..n_x {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[i] = (x[i] + dir * step[i]).clamp(states.lo[i], states.hi[i]);
                if trial[i] == x[i] {
                    continue;
                }
                let c = cost(&trial);
                if c < best {
                    best = c;
                    x.copy_from_slice(&trial);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|h| *h *= 0.5);
        }
    }
    let x_end = iterate_unchecked(sys, &x, inputs);
    Ok(Inversion {
        x_start: x,
        x_end,
        residual: best,
    })
}

fn grid_search(states: &BoxSet, n: usize, cost: &impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let dim = states.dim();
    let point = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(i, &k)| grid_coord(states.lo[i], states.hi[i], n, k))
            .collect()
    };
    let mut idx = vec![0usize; dim];
    let mut best_x = point(&idx);
    let mut best = cost(&best_x);
    loop {
        // Odometer increment, last axis fastest: lexicographic order.
        let mut axis = dim;
        loop {
            if axis == 0 {
                return (best_x, best);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
        }
        let x = point(&idx);
        let c = cost(&x);
        if c < best {
            best = c;
            best_x = x;
        }
    }
}

/// Coordinate of grid index `k` on an `n`-point axis over `[lo, hi]`.
pub fn grid_coord(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}
