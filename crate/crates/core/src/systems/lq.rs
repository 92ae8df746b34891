//! Receding-horizon linear-quadratic tracking for the planar drone.
//!
//! The drone is linearized about hover (θ = 0, zero velocities, both rotors at the hover
//! speed). Hover is an equilibrium at every position, so in rotor-speed deviations
//! `v = Ω − Ω_h` the discrete model is `x' = A x + B v` with no affine term. Gains come
//! from the finite-horizon Riccati recursion; the reference enters through the linear
//! term of the cost-to-go, recomputed at every call.

use nalgebra::{Matrix2, Matrix6, SMatrix, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use super::{DroneParams, DroneState};
use crate::{Error, Result};

type Matrix6x2 = SMatrix<f64, 6, 2>;
type Matrix2x6 = SMatrix<f64, 2, 6>;

/// Diagonal stage weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqWeights {
    pub position: f64,
    pub angle: f64,
    pub velocity: f64,
    pub angular_rate: f64,
    /// Weight on squared rotor-speed deviation, per rotor.
    pub input: f64,
    /// Terminal cost = `terminal_scale` × stage state cost.
    pub terminal_scale: f64,
}

impl Default for LqWeights {
    fn default() -> Self {
        Self {
            position: 40.0,
            angle: 1.0,
            velocity: 4.0,
            angular_rate: 0.1,
            input: 1e-4,
            terminal_scale: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LqTracker {
    params: DroneParams,
    hover: f64,
    omega_max: f64,
    q: Matrix6<f64>,
    q_terminal: Matrix6<f64>,
    /// Feedback gain per stage.
    gains: Vec<Matrix2x6>,
    /// `(R + BᵀPB)⁻¹ Bᵀ` per stage.
    feedforward: Vec<Matrix2x6>,
    /// `(A − B K)ᵀ` per stage.
    closed_loop_t: Vec<Matrix6<f64>>,
}

fn linearize(p: &DroneParams) -> (Matrix6<f64>, Matrix6x2) {
    let wh = p.hover_speed();
    let drag = p.gamma / p.mass * 2.0 * wh;
    let mut ac = Matrix6::<f64>::zeros();
    ac[(0, 3)] = 1.0;
    ac[(1, 4)] = 1.0;
    ac[(2, 5)] = 1.0;
    ac[(3, 2)] = -p.k_t / p.mass * 2.0 * wh * wh;
    ac[(3, 3)] = -drag;
    ac[(4, 4)] = -drag;
    let mut bc = Matrix6x2::zeros();
    let dthrust = 2.0 * p.k_t * wh / p.mass;
    bc[(4, 0)] = dthrust;
    bc[(4, 1)] = dthrust;
    let dtorque = 2.0 * p.k_t * p.arm_length * wh / p.inertia;
    bc[(5, 0)] = -dtorque;
    bc[(5, 1)] = dtorque;
    (Matrix6::identity() + ac * p.dt, bc * p.dt)
}

impl LqTracker {
    pub fn new(params: DroneParams, weights: LqWeights, horizon: usize, omega_max: f64) -> Result<Self> {
        params.validate()?;
        if horizon == 0 {
            return Err(Error::Config("LQ horizon must be >= 1".into()));
        }
        if !(weights.input > 0.0) {
            return Err(Error::Config("LQ input weight must be positive".into()));
        }
        let (a, b) = linearize(&params);
        let q = Matrix6::from_diagonal(&Vector6::new(
            weights.position,
            weights.position,
            weights.angle,
            weights.velocity,
            weights.velocity,
            weights.angular_rate,
        ));
        let r = Matrix2::from_diagonal_element(weights.input);
        let q_terminal = q * weights.terminal_scale;

        let mut gains = vec![Matrix2x6::zeros(); horizon];
        let mut feedforward = vec![Matrix2x6::zeros(); horizon];
        let mut closed_loop_t = vec![Matrix6::zeros(); horizon];
        let mut p = q_terminal;
        for k in (0..horizon).rev() {
            let bt_p = b.transpose() * p;
            let g = r + bt_p * b;
            let g_inv = g.try_inverse().ok_or_else(|| {
                Error::Controller(format!("singular Riccati stage matrix at stage {k}"))
            })?;
            let gain = g_inv * bt_p * a;
            let acl = a - b * gain;
            p = q + a.transpose() * p * acl;
            p = (p + p.transpose()) * 0.5;
            if p.iter().any(|v| !v.is_finite()) || gain.iter().any(|v| !v.is_finite()) {
                return Err(Error::Controller(format!("Riccati recursion diverged at stage {k}")));
            }
            gains[k] = gain;
            feedforward[k] = g_inv * b.transpose();
            closed_loop_t[k] = acl.transpose();
        }
        Ok(Self {
            hover: params.hover_speed(),
            params,
            omega_max,
            q,
            q_terminal,
            gains,
            feedforward,
            closed_loop_t,
        })
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn params(&self) -> &DroneParams {
        &self.params
    }

    /// Rotor speeds for `state`, tracking `reference[k]` at `k` steps ahead.
    ///
    /// `reference[0]` is the desired state now; it is padded with its last entry
    /// when shorter than the horizon. Commands are clamped to `[0, omega_max]`.
    pub fn command(&self, state: &DroneState, reference: &[DroneState]) -> Result<[f64; 2]> {
        let last = reference
            .last()
            .ok_or_else(|| Error::Usage("empty reference".into()))?;
        let n = self.horizon();
        let r_at = |k: usize| Vector6::from(reference.get(k).unwrap_or(last).to_array());
        // Linear cost-to-go term q_k, run back to stage 1.
        let mut lin = -(self.q_terminal * r_at(n));
        for k in (1..n).rev() {
            lin = -(self.q * r_at(k)) + self.closed_loop_t[k] * lin;
        }
        let x = Vector6::from(state.to_array());
        let dv: Vector2<f64> = -(self.gains[0] * x) - self.feedforward[0] * lin;
        if dv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Controller("non-finite LQ command".into()));
        }
        Ok([
            (self.hover + dv[0]).clamp(0.0, self.omega_max),
            (self.hover + dv[1]).clamp(0.0, self.omega_max),
        ])
    }
}

/// One-shot tracker call: build the gains for `horizon` and return the first command.
pub fn lq_tracker(
    reference: &[DroneState],
    state: &DroneState,
    params: &DroneParams,
    horizon: usize,
) -> Result<[f64; 2]> {
    LqTracker::new(*params, LqWeights::default(), horizon, 300.0)?.command(state, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{drone_step, SplineReference};

    #[test]
    fn hover_reference_commands_hover() {
        let p = DroneParams::default();
        let s = DroneState::at_rest(0.7, -0.4);
        let [w1, w2] = lq_tracker(&[s], &s, &p, 30).unwrap();
        let wh = p.hover_speed();
        assert!((w1 - wh).abs() < 1e-6 && (w2 - wh).abs() < 1e-6, "{w1} {w2}");
    }

    #[test]
    fn climbs_toward_higher_reference() {
        let p = DroneParams::default();
        let s = DroneState::default();
        let target = DroneState::at_rest(0.0, 1.0);
        let [w1, w2] = lq_tracker(&[target], &s, &p, 30).unwrap();
        let thrust = p.k_t * (w1 * w1 + w2 * w2);
        assert!(thrust > p.mass * p.gravity, "thrust {thrust}");
    }

    #[test]
    fn tracks_smooth_spline() {
        let p = DroneParams::default();
        let tracker = LqTracker::new(p, LqWeights::default(), 30, 300.0).unwrap();
        let wps = vec![
            vec![0.0, 0.0],
            vec![1.5, -1.0],
            vec![-1.0, 1.8],
            vec![-2.0, -1.5],
            vec![1.0, 0.5],
            vec![0.2, 2.0],
        ];
        let n = 600;
        let sref = SplineReference::new(&wps, n).unwrap();
        let pos = sref.sample(n);
        let vel = sref.sample_derivative(n);
        let refs: Vec<DroneState> = pos
            .iter()
            .zip(&vel)
            .map(|(p_, v)| DroneState {
                px: p_[0],
                pz: p_[1],
                vx: v[0] / p.dt,
                vz: v[1] / p.dt,
                ..DroneState::default()
            })
            .collect();
        let mut s = refs[0];
        s.vx = 0.0;
        s.vz = 0.0;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let u = tracker.command(&s, &refs[k..]).unwrap();
            s = drone_step(&s, u, &p).unwrap();
            if k >= 60 && k + 1 < n {
                let e = ((s.px - refs[k + 1].px).powi(2) + (s.pz - refs[k + 1].pz).powi(2)).sqrt();
                worst = worst.max(e);
            }
        }
        assert!(worst < 0.3, "max position error after transient {worst}");
    }
}
