use serde::{Deserialize, Serialize};

use super::DynamicalSystem;
use crate::{Error, Result};

/// Discrete update gains of the cascaded two-tank plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl Default for TankParams {
    fn default() -> Self {
        Self {
            k1: 0.5,
            k2: 0.4,
            k3: 0.2,
            k4: 0.3,
        }
    }
}

impl TankParams {
    pub fn validate(&self) -> Result<()> {
        let ks = [self.k1, self.k2, self.k3, self.k4];
        if ks.iter().all(|k| k.is_finite() && *k > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("tank gains must be positive, got {ks:?}")))
        }
    }

    /// Steady state reached under a constant input `u`.
    pub fn equilibrium(&self, u: f64) -> TankState {
        let s1 = self.k2 * u / self.k1;
        let s2 = self.k3 * s1 / self.k4;
        TankState {
            x1: s1 * s1,
            x2: s2 * s2,
        }
    }

    /// Constant input holding the lower tank at `level`.
    pub fn input_for_level(&self, level: f64) -> f64 {
        let s2 = level.max(0.0).sqrt();
        let s1 = self.k4 * s2 / self.k3;
        self.k1 * s1 / self.k2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TankState {
    pub x1: f64,
    pub x2: f64,
}

impl TankState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x1, self.x2]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self { x1: x[0], x2: x[1] }
    }
}

/// One step of the tank plant. Square roots of negative levels read as empty tanks and
/// results are clamped at zero.
pub fn tank_step(x: TankState, u: f64, p: &TankParams) -> TankState {
    let s1 = x.x1.max(0.0).sqrt();
    let s2 = x.x2.max(0.0).sqrt();
    TankState {
        x1: (x.x1 - p.k1 * s1 + p.k2 * u).max(0.0),
        x2: (x.x2 + p.k3 * s1 - p.k4 * s2).max(0.0),
    }
}

/// Measured level of the lower tank with additive noise `w`.
pub fn tank_observe(x: TankState, w: f64) -> f64 {
    x.x2 + w
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Tank {
    pub params: TankParams,
}

impl DynamicalSystem for Tank {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        tank_step(TankState::from_slice(x), u[0], &self.params).to_vec()
    }

    fn observe(&self, x: &[f64], _u: &[f64]) -> Vec<f64> {
        vec![x[1]]
    }
}
