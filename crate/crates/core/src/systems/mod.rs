//! Ground-truth plants and the controllers used to excite them.

mod drone;
mod lq;
mod noise;
mod pid;
mod spline;
mod tank;

pub use drone::{drone_accel, drone_step, Drone, DroneParams, DroneState};
pub use lq::{lq_tracker, LqTracker, LqWeights};
pub use noise::add_noise;
pub use pid::{Pid, PidGains, PidState};
pub use spline::{knot_steps, spline_reference, CubicSpline, SplineReference};
pub use tank::{tank_observe, tank_step, Tank, TankParams, TankState};

/// Discrete-time plant `x' = f(x, u)`, `y = h(x, u)` with noise-free output map.
pub trait DynamicalSystem: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    fn observe(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
}

/// A plant assembled from closures, handy for analytic test systems.
pub struct FnSystem<F, H> {
    pub state_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub f: F,
    pub h: H,
}

impl<F, H> DynamicalSystem for FnSystem<F, H>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
    H: Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.f)(x, u)
    }

    fn observe(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.h)(x, u)
    }
}
