//! Output-error loss over a trajectory and its gradient by backpropagation through the
//! rollout recursion.
//!
//! The first `ell` pairs of a trajectory are burn-in: they form the initial state and
//! contribute no loss. From then on the state is driven by the model's own predictions.
//! Everything here works in normalized units.

use std::ops::Range;

use super::model::{RegressorModel, Series};
use super::state::{shift_in_place, StateMapSpec};
use crate::datagen::Trajectory;
use crate::nn::{Mlp, Trace};
use crate::{Error, Result};

/// Weight on the first predicted step after burn-in.
pub const FIRST_STEP_WEIGHT: f64 = 10.0;

fn step_weight(spec: &StateMapSpec, t: usize, first_weight: f64) -> f64 {
    if t == spec.ell {
        first_weight
    } else {
        1.0
    }
}

/// Run steps `steps` from state `z` (the state at `steps.start`), leaving `z` at the
/// state after the last step. Returns the unscaled sum of weighted squared residuals.
///
/// With `grads`, also accumulates `scale` times the gradient of that sum with respect to
/// the network parameters, treating the incoming `z` as a constant.
pub(crate) fn segment_loss(
    net: &Mlp,
    spec: &StateMapSpec,
    series: &Series,
    z: &mut [f64],
    steps: Range<usize>,
    first_weight: f64,
    grads: Option<(&mut [f64], f64)>,
) -> f64 {
    let n_y = spec.n_y;
    let l = spec.state_dim();
    let mut input = vec![0.0; spec.input_dim()];
    let mut loss = 0.0;

    let Some((grads, scale)) = grads else {
        let mut trace = Trace::default();
        for t in steps {
            input[..l].copy_from_slice(z);
            input[l..].copy_from_slice(series.u(t));
            let y_hat = net.eval(&input, &mut trace);
            let w = step_weight(spec, t, first_weight);
            loss += w * y_hat.iter().zip(series.y(t)).map(|(p, y)| (y - p) * (y - p)).sum::<f64>();
            shift_in_place(spec, z, series.u(t), y_hat);
        }
        return loss;
    };

    let mut traces: Vec<Trace> = Vec::with_capacity(steps.len());
    for t in steps.clone() {
        input[..l].copy_from_slice(z);
        input[l..].copy_from_slice(series.u(t));
        let mut trace = Trace::default();
        net.forward_traced(&input, &mut trace);
        let y_hat = trace.output();
        let w = step_weight(spec, t, first_weight);
        loss += w * y_hat.iter().zip(series.y(t)).map(|(p, y)| (y - p) * (y - p)).sum::<f64>();
        shift_in_place(spec, z, series.u(t), y_hat);
        traces.push(trace);
    }

    let m = spec.block();
    let y_slot = spec.last_y_offset();
    // gz = d(loss)/d(state entering the step after the current one).
    let mut gz = vec![0.0; l];
    let mut gz_prev = vec![0.0; l];
    let mut d_input = vec![0.0; spec.input_dim()];
    let mut d_out = vec![0.0; n_y];
    for (trace, t) in traces.iter().zip(steps).rev() {
        let w = step_weight(spec, t, first_weight);
        for (j, d) in d_out.iter_mut().enumerate() {
            *d = scale * 2.0 * w * (trace.output()[j] - series.y(t)[j]) + gz[y_slot + j];
        }
        net.backward(trace, &d_out, grads, Some(&mut d_input));
        gz_prev.copy_from_slice(&d_input[..l]);
        for i in 0..l - m {
            gz_prev[i + m] += gz[i];
        }
        std::mem::swap(&mut gz, &mut gz_prev);
    }
    loss
}

fn check_length(spec: &StateMapSpec, traj: &Trajectory) -> Result<()> {
    if traj.len() < spec.ell + 1 {
        return Err(Error::Usage(format!(
            "trajectory {} has {} steps; the loss needs at least ell + 1 = {}",
            traj.id,
            traj.len(),
            spec.ell + 1
        )));
    }
    traj.validate(spec.n_u, spec.n_y)
}

/// `J = (1/T) sum_t alpha_t |y_t - H(z_t, u_t)|^2` over the `T = len - ell` steps after
/// burn-in, with `alpha = first_weight` on the first of them and 1 elsewhere.
pub fn regression_loss(model: &RegressorModel, traj: &Trajectory, first_weight: f64) -> Result<f64> {
    let spec = model.spec();
    check_length(spec, traj)?;
    let series = Series::new(traj, model.normalization());
    let mut z = series.window(spec, 0);
    let sum = segment_loss(model.net(), spec, &series, &mut z, spec.ell..series.len, first_weight, None);
    let j = sum * (1.0 / (series.len - spec.ell) as f64);
    if !j.is_finite() {
        return Err(Error::Numeric(format!("loss on trajectory {}", traj.id)));
    }
    Ok(j)
}

/// `J` and its gradient with respect to the flat network parameters.
///
/// With `chunk_len = None` the gradient is exact through the whole rollout. With
/// `Some(k)` the recursion is cut every `k` steps: the state is carried across the cut
/// but treated as a constant there, as in training.
pub fn regression_loss_gradient(
    model: &RegressorModel,
    traj: &Trajectory,
    first_weight: f64,
    chunk_len: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    let spec = model.spec();
    check_length(spec, traj)?;
    let series = Series::new(traj, model.normalization());
    let t_count = series.len - spec.ell;
    let chunk = chunk_len.unwrap_or(t_count).max(1);
    let scale = 1.0 / t_count as f64;
    let mut grads = vec![0.0; model.net().n_params()];
    let mut z = series.window(spec, 0);
    let mut sum = 0.0;
    let mut start = spec.ell;
    while start < series.len {
        let end = (start + chunk).min(series.len);
        sum += segment_loss(
            model.net(),
            spec,
            &series,
            &mut z,
            start..end,
            first_weight,
            Some((&mut grads, scale)),
        );
        start = end;
    }
    let j = sum * scale;
    if !j.is_finite() {
        return Err(Error::Numeric(format!("loss on trajectory {}", traj.id)));
    }
    Ok((j, grads))
}
