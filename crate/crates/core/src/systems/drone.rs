use serde::{Deserialize, Serialize};

use super::DynamicalSystem;
use crate::{Error, Result};

/// Physical constants of the planar two-rotor drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneParams {
    /// Thrust constant (N·s²).
    pub k_t: f64,
    /// Rotor friction coefficient.
    pub gamma: f64,
    /// Arm length (m).
    pub arm_length: f64,
    /// Mass (kg).
    pub mass: f64,
    /// Rotational inertia (kg·m²).
    pub inertia: f64,
    pub gravity: f64,
    /// Euler step (s).
    pub dt: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            k_t: 4e-4,
            gamma: 1e-9,
            arm_length: 0.15,
            mass: 1.0,
            inertia: 2.7e-3,
            gravity: 9.81,
            dt: 1.0 / 30.0,
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_t,
            self.gamma,
            self.arm_length,
            self.mass,
            self.inertia,
            self.gravity,
            self.dt,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("drone parameters must be positive, got {self:?}")))
        }
    }

    /// Rotor speed at which two equal rotors balance gravity.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (2.0 * self.k_t)).sqrt()
    }
}

/// Position, attitude and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    pub px: f64,
    pub pz: f64,
    pub theta: f64,
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
}

impl DroneState {
    pub fn at_rest(px: f64, pz: f64) -> Self {
        Self {
            px,
            pz,
            ..Self::default()
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.px, self.pz, self.theta, self.vx, self.vz, self.omega]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            px: s[0],
            pz: s[1],
            theta: s[2],
            vx: s[3],
            vz: s[4],
            omega: s[5],
        }
    }

    pub fn output(&self) -> [f64; 3] {
        [self.px, self.pz, self.theta]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Linear and angular accelerations `(p̈x, p̈z, θ̈)` under rotor speeds `rotors`.
pub fn drone_accel(s: &DroneState, rotors: [f64; 2], p: &DroneParams) -> [f64; 3] {
    let [w1, w2] = rotors;
    let thrust = p.k_t / p.mass * (w1 * w1 + w2 * w2);
    let drag = p.gamma / p.mass * (w1 + w2);
    [
        -thrust * s.theta.sin() - drag * s.vx,
        thrust * s.theta.cos() - drag * s.vz - p.gravity,
        p.k_t * p.arm_length / p.inertia * (w2 * w2 - w1 * w1),
    ]
}

fn euler(s: &DroneState, rotors: [f64; 2], p: &DroneParams) -> DroneState {
    let [ax, az, alpha] = drone_accel(s, rotors, p);
    let dt = p.dt;
    DroneState {
        px: s.px + dt * s.vx,
        pz: s.pz + dt * s.vz,
        theta: s.theta + dt * s.omega,
        vx: s.vx + dt * ax,
        vz: s.vz + dt * az,
        omega: s.omega + dt * alpha,
    }
}

/// One explicit Euler step of the drone dynamics.
pub fn drone_step(s: &DroneState, rotors: [f64; 2], p: &DroneParams) -> Result<DroneState> {
    if rotors.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Usage(format!("rotor speeds must be >= 0, got {rotors:?}")));
    }
    let next = euler(s, rotors, p);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Numeric("drone step".into()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Drone {
    pub params: DroneParams,
}

impl DynamicalSystem for Drone {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        euler(&DroneState::from_slice(x), [u[0], u[1]], &self.params)
            .to_array()
            .to_vec()
    }

    fn observe(&self, x: &[f64], _u: &[f64]) -> Vec<f64> {
        x[..3].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_is_fixed_point() {
        let p = DroneParams::default();
        let wh = p.hover_speed();
        assert!((wh - 110.736).abs() < 1e-3, "{wh}");
        let s = DroneState::at_rest(0.3, -1.2);
        let acc = drone_accel(&s, [wh, wh], &p);
        assert!(acc.iter().all(|a| a.abs() < 1e-10), "{acc:?}");
        let next = drone_step(&s, [wh, wh], &p).unwrap();
        for (a, b) in next.to_array().iter().zip(s.to_array()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn free_fall() {
        let p = DroneParams::default();
        let acc = drone_accel(&DroneState::default(), [0.0, 0.0], &p);
        assert_eq!(acc, [0.0, -9.81, 0.0]);
    }

    #[test]
    fn zero_thrust_zero_friction_falls_at_g_every_step() {
        let p = DroneParams {
            gamma: 1e-300,
            ..DroneParams::default()
        };
        let mut s = DroneState::at_rest(0.0, 5.0);
        for _ in 0..100 {
            assert_eq!(drone_accel(&s, [0.0, 0.0], &p)[1], -p.gravity);
            s = drone_step(&s, [0.0, 0.0], &p).unwrap();
        }
    }

    #[test]
    fn differential_thrust_pitches_up() {
        let p = DroneParams::default();
        let acc = drone_accel(&DroneState::default(), [100.0, 101.0], &p);
        assert!(acc[2] > 0.0);
    }

    #[test]
    fn negative_rotor_speed_rejected() {
        let p = DroneParams::default();
        assert!(drone_step(&DroneState::default(), [-1.0, 0.0], &p).is_err());
    }
}
