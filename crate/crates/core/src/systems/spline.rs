use crate::{Error, Result};

/// Natural cubic spline through `(knots[i], values[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(knots: &[f64], values: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n < 2 {
            return Err(Error::Usage(format!("a spline needs at least 2 knots, got {n}")));
        }
        if values.len() != n {
            return Err(Error::shape("spline values", n, values.len()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("spline knots must be strictly increasing".into()));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let m = n - 2;
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h[i + 1]
                        - (values[i + 1] - values[i]) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        })
    }

    fn interval(&self, t: f64) -> usize {
        let last = self.knots.len() - 2;
        self.knots.partition_point(|&k| k <= t).saturating_sub(1).min(last)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        (self.values[i + 1] - self.values[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.second[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.second[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Integer step indices of `n_waypoints` knots spread evenly over `horizon` samples.
///
/// First knot at step 0, last at `horizon - 1`.
pub fn knot_steps(n_waypoints: usize, horizon: usize) -> Vec<usize> {
    if n_waypoints < 2 {
        return vec![0; n_waypoints];
    }
    let span = (horizon - 1) as f64;
    (0..n_waypoints)
        .map(|i| (span * i as f64 / (n_waypoints - 1) as f64).round() as usize)
        .collect()
}

/// Per-channel natural splines through waypoints placed at [`knot_steps`].
#[derive(Debug, Clone)]
pub struct SplineReference {
    channels: Vec<CubicSpline>,
    knot_steps: Vec<usize>,
}

impl SplineReference {
    pub fn new(waypoints: &[Vec<f64>], horizon: usize) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Usage(format!(
                "a reference needs at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        if horizon < waypoints.len() {
            return Err(Error::Usage(format!(
                "horizon {horizon} too short for {} waypoints",
                waypoints.len()
            )));
        }
        let dim = waypoints[0].len();
        if let Some(bad) = waypoints.iter().find(|w| w.len() != dim) {
            return Err(Error::shape("waypoint", dim, bad.len()));
        }
        let steps = knot_steps(waypoints.len(), horizon);
        let knots: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
        let channels = (0..dim)
            .map(|c| {
                let values: Vec<f64> = waypoints.iter().map(|w| w[c]).collect();
                CubicSpline::natural(&knots, &values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            knot_steps: steps,
        })
    }

    pub fn knot_steps(&self) -> &[usize] {
        &self.knot_steps
    }

    /// Reference value at every step `0..horizon`.
    pub fn sample(&self, horizon: usize) -> Vec<Vec<f64>> {
        (0..horizon)
            .map(|k| self.channels.iter().map(|s| s.eval(k as f64)).collect())
            .collect()
    }

    /// Time derivative per step (divide by the step length for physical units).
    pub fn sample_derivative(&self, horizon: usize) -> Vec<Vec<f64>> {
        (0..horizon)
            .map(|k| self.channels.iter().map(|s| s.derivative(k as f64)).collect())
            .collect()
    }
}

/// Natural cubic spline through `waypoints`, evenly spread in time, sampled at every step.
pub fn spline_reference(waypoints: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    Ok(SplineReference::new(waypoints, horizon)?.sample(horizon))
}
