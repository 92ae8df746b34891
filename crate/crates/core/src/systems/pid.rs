use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    /// Gains tuned on the default tank plant with steady-state feedforward.
    fn default() -> Self {
        Self {
            kp: 4.0,
            ki: 0.01,
            kd: 8.0,
        }
    }
}

/// Discrete PID with output saturation and conditional-integration anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pid {
    pub gains: PidGains,
    pub u_min: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl Pid {
    pub fn control(&self, reference: f64, measurement: f64, state: &mut PidState) -> f64 {
        self.control_with_feedforward(reference, measurement, 0.0, state)
    }

    /// PID correction added to a feedforward command `ff`, then saturated.
    pub fn control_with_feedforward(
        &self,
        reference: f64,
        measurement: f64,
        ff: f64,
        state: &mut PidState,
    ) -> f64 {
        let PidGains { kp, ki, kd } = self.gains;
        let e = reference - measurement;
        let de = state.prev_error.map_or(0.0, |prev| e - prev);
        state.prev_error = Some(e);
        let unsaturated = ff + kp * e + ki * (state.integral + e) + kd * de;
        if (self.u_min..=self.u_max).contains(&unsaturated) {
            state.integral += e;
            unsaturated
        } else {
            // Saturated: integrator frozen.
            (ff + kp * e + ki * state.integral + kd * de).clamp(self.u_min, self.u_max)
        }
    }
}
