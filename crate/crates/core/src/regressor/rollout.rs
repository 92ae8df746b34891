use std::path::Path;

use serde::Serialize;

use super::model::RegressorModel;
use super::state::StateMapSpec;
use super::train::csv_error;
use crate::datagen::Trajectory;
use crate::{exec, Error, Result};

/// Anything that predicts outputs from an initial window and future inputs, in raw units.
pub trait Forecaster: Sync {
    fn spec(&self) -> &StateMapSpec;

    fn forecast(
        &self,
        init_inputs: &[Vec<f64>],
        init_outputs: &[Vec<f64>],
        inputs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>>;
}

impl Forecaster for RegressorModel {
    fn spec(&self) -> &StateMapSpec {
        RegressorModel::spec(self)
    }

    fn forecast(
        &self,
        init_inputs: &[Vec<f64>],
        init_outputs: &[Vec<f64>],
        inputs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        self.rollout(init_inputs, init_outputs, inputs)
    }
}

/// Free-run prediction with `model` from `init_window` pairs over `inputs`.
pub fn rollout(
    model: &RegressorModel,
    init_inputs: &[Vec<f64>],
    init_outputs: &[Vec<f64>],
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    model.rollout(init_inputs, init_outputs, inputs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub trajectory_id: String,
    pub window_size: usize,
    pub horizon: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    pub skipped: Vec<String>,
}

impl Evaluation {
    /// Mean over evaluated trajectories; NaN when none were evaluated.
    pub fn mean_mse(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.mse).sum::<f64>() / self.rows.len() as f64
    }
}

/// Mean squared error between two equally long output sequences.
pub fn sequence_mse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, y) in pred.iter().zip(truth) {
        for (a, b) in p.iter().zip(y) {
            sum += (a - b) * (a - b);
            n += 1;
        }
    }
    sum / n as f64
}

/// One free-run rollout per trajectory, initialized from its first `ell` measured pairs
/// and scored over the next `horizon` steps in raw units. Trajectories shorter than
/// `ell + horizon` are skipped with a warning.
pub fn evaluate_rollout<F: Forecaster>(
    model: &F,
    trajectories: &[Trajectory],
    horizon: usize,
) -> Result<Evaluation> {
    if horizon == 0 {
        return Err(Error::Usage("evaluation horizon must be >= 1".into()));
    }
    let ell = model.spec().ell;
    let (usable, skipped): (Vec<&Trajectory>, Vec<&Trajectory>) =
        trajectories.iter().partition(|t| t.len() >= ell + horizon);
    for t in &skipped {
        log::warn!(
            "skipping {}: {} steps is shorter than ell + horizon = {}",
            t.id,
            t.len(),
            ell + horizon
        );
    }
    let rows = exec::map(&usable, |t| -> Result<EvalRow> {
        let pred = model.forecast(&t.inputs[..ell], &t.outputs[..ell], &t.inputs[ell..ell + horizon])?;
        Ok(EvalRow {
            trajectory_id: t.id.clone(),
            window_size: ell,
            horizon,
            mse: sequence_mse(&pred, &t.outputs[ell..ell + horizon]),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        rows,
        skipped: skipped.iter().map(|t| t.id.clone()).collect(),
    })
}

/// Per-trajectory rows: `trajectory_id,window_size,horizon,mse`.
pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummaryRow {
    pub window_size: usize,
    pub horizon: usize,
    pub n_trajectories: usize,
    pub mse: f64,
}

impl From<&Evaluation> for Option<EvalSummaryRow> {
    fn from(e: &Evaluation) -> Self {
        let first = e.rows.first()?;
        Some(EvalSummaryRow {
            window_size: first.window_size,
            horizon: first.horizon,
            n_trajectories: e.rows.len(),
            mse: e.mean_mse(),
        })
    }
}

/// One row per window size: `window_size,horizon,n_trajectories,mse`.
pub fn write_summary_csv(path: &Path, rows: &[EvalSummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Normalization;
    use crate::nn::{Activation, Mlp};

    fn zero_model(ell: usize) -> RegressorModel {
        let spec = StateMapSpec::new(ell, 1, 1).unwrap();
        let net = Mlp::zeros(&[spec.input_dim(), 1], Activation::Identity).unwrap();
        RegressorModel::from_parts(spec, net, Normalization::identity(1, 1)).unwrap()
    }

    fn traj(id: &str, n: usize) -> Trajectory {
        Trajectory {
            id: id.into(),
            dt: 1.0,
            inputs: (0..n).map(|i| vec![i as f64]).collect(),
            outputs: (0..n).map(|i| vec![(i as f64 * 0.37).sin() + 1.0]).collect(),
            true_states: None,
        }
    }

    #[test]
    fn zero_predictor_mse_is_mean_square() {
        let m = zero_model(3);
        let t = traj("a", 20);
        let e = evaluate_rollout(&m, std::slice::from_ref(&t), 10).unwrap();
        let expected: f64 = t.outputs[3..13].iter().map(|y| y[0] * y[0]).sum::<f64>() / 10.0;
        assert!((e.rows[0].mse - expected).abs() < 1e-14);
    }

    #[test]
    fn short_trajectories_skipped() {
        let m = zero_model(3);
        let e = evaluate_rollout(&m, &[traj("a", 20), traj("b", 8), traj("c", 13)], 10).unwrap();
        assert_eq!(e.rows.len(), 2);
        assert_eq!(e.skipped, vec!["b".to_string()]);
    }

    #[test]
    fn csv_has_one_row_per_trajectory() {
        let m = zero_model(2);
        let e = evaluate_rollout(&m, &[traj("a", 20), traj("b", 20)], 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eval.csv");
        write_eval_csv(&p, &e.rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trajectory_id,window_size,horizon,mse");
        assert_eq!(lines.len(), 3);
    }
}
