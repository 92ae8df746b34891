use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, SystemKind, Trajectory};
use crate::systems::{
    add_noise, drone_step, tank_step, DroneParams, DroneState, LqTracker, LqWeights, Pid,
    PidGains, PidState, SplineReference, TankParams,
};
use crate::{exec, seed, Error, Result};

const STREAM_REFERENCE: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TankDataConfig {
    pub params: TankParams,
    pub pid: PidGains,
    pub u_min: f64,
    pub u_max: f64,
    pub n_waypoints: usize,
    /// Waypoint levels are drawn uniformly from this range; the reference is clamped to it.
    pub level_range: [f64; 2],
    pub horizon: usize,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
}

impl Default for TankDataConfig {
    fn default() -> Self {
        Self {
            params: TankParams::default(),
            pid: PidGains::default(),
            u_min: 0.0,
            u_max: 5.0,
            n_waypoints: 5,
            level_range: [0.0, 5.0],
            horizon: 200,
            noise_sigma: 0.05,
            n_train: 60,
            n_valid: 20,
            n_test: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneDataConfig {
    pub params: DroneParams,
    pub weights: LqWeights,
    pub lq_horizon: usize,
    pub omega_max: f64,
    pub min_waypoints: usize,
    pub max_waypoints: usize,
    pub position_range: [f64; 2],
    pub horizon: usize,
    /// Per output channel `(px, pz, θ)`.
    pub noise_sigma: [f64; 3],
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Position error (m) beyond which a tracked flight counts as diverged.
    pub divergence_distance: f64,
    pub max_resamples: usize,
}

impl Default for DroneDataConfig {
    fn default() -> Self {
        Self {
            params: DroneParams::default(),
            weights: LqWeights::default(),
            lq_horizon: 30,
            omega_max: 300.0,
            min_waypoints: 5,
            max_waypoints: 10,
            position_range: [-2.0, 2.0],
            horizon: 600,
            noise_sigma: [0.01, 0.01, 0.01],
            n_train: 500,
            n_valid: 20,
            n_test: 20,
            divergence_distance: 5.0,
            max_resamples: 20,
        }
    }
}

fn trajectory_id(system: SystemKind, split: &str, index: usize) -> String {
    format!("{system}-{split}-{index:04}")
}

/// Split a flat list of trajectories (train, then valid, then test) into three vectors.
fn split_three(
    mut all: Vec<Trajectory>,
    n_train: usize,
    n_valid: usize,
) -> (Vec<Trajectory>, Vec<Trajectory>, Vec<Trajectory>) {
    let test = all.split_off(n_train + n_valid);
    let valid = all.split_off(n_train);
    (all, valid, test)
}

fn layout(system: SystemKind, n_train: usize, n_valid: usize, n_test: usize) -> Vec<String> {
    let mut ids = Vec::with_capacity(n_train + n_valid + n_test);
    ids.extend((0..n_train).map(|i| trajectory_id(system, "train", i)));
    ids.extend((0..n_valid).map(|i| trajectory_id(system, "valid", i)));
    ids.extend((0..n_test).map(|i| trajectory_id(system, "test", i)));
    ids
}

pub(crate) fn simulate_tank(cfg: &TankDataConfig, seed: u64, index: usize, id: String) -> Result<Trajectory> {
    let mut rng = seed::derived_rng(seed, STREAM_REFERENCE, index as u64);
    let [lo, hi] = cfg.level_range;
    let waypoints: Vec<Vec<f64>> = (0..cfg.n_waypoints)
        .map(|_| vec![rng.random_range(lo..=hi)])
        .collect();
    let reference: Vec<f64> = SplineReference::new(&waypoints, cfg.horizon)?
        .sample(cfg.horizon)
        .into_iter()
        .map(|r| r[0].clamp(lo, hi))
        .collect();

    let pid = Pid {
        gains: cfg.pid,
        u_min: cfg.u_min,
        u_max: cfg.u_max,
    };
    let p = &cfg.params;
    let u0 = p.input_for_level(reference[0]).clamp(cfg.u_min, cfg.u_max);
    let mut x = p.equilibrium(u0);
    let mut pid_state = PidState::default();

    let mut inputs = Vec::with_capacity(cfg.horizon);
    let mut outputs = Vec::with_capacity(cfg.horizon);
    let mut states = Vec::with_capacity(cfg.horizon);
    for &r in &reference {
        let y = x.x2;
        let ff = p.input_for_level(r).clamp(cfg.u_min, cfg.u_max);
        let u = pid.control_with_feedforward(r, y, ff, &mut pid_state);
        inputs.push(vec![u]);
        outputs.push(vec![y]);
        states.push(x.to_vec());
        x = tank_step(x, u, p);
    }
    let noise_seed = seed::derive(seed, STREAM_NOISE, index as u64);
    let outputs = add_noise(&outputs, &[cfg.noise_sigma], noise_seed)?;
    Ok(Trajectory {
        id,
        dt: 1.0,
        inputs,
        outputs,
        true_states: Some(states),
    })
}

/// Cascaded-tank dataset: spline references through random levels tracked by PID.
pub fn generate_tank_dataset(cfg: &TankDataConfig, seed: u64) -> Result<Dataset> {
    cfg.params.validate()?;
    if cfg.n_waypoints < 2 || cfg.horizon < cfg.n_waypoints {
        return Err(Error::Config("tank data needs >= 2 waypoints and horizon >= waypoints".into()));
    }
    if !(cfg.u_min < cfg.u_max) || !(cfg.level_range[0] < cfg.level_range[1]) {
        return Err(Error::Config("tank input and level ranges must be non-empty".into()));
    }
    let ids = layout(SystemKind::Tank, cfg.n_train, cfg.n_valid, cfg.n_test);
    let all = exec::map_range(ids.len(), |i| simulate_tank(cfg, seed, i, ids[i].clone()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (train, valid, test) = split_three(all, cfg.n_train, cfg.n_valid);
    Dataset::new(SystemKind::Tank, 1, 1, 1.0, train, valid, test)
}

/// One tracked flight, or `None` if the tracker lost the reference.
fn fly_drone(cfg: &DroneDataConfig, tracker: &LqTracker, flight_seed: u64) -> Result<Option<Trajectory>> {
    let mut rng = seed::rng(flight_seed);
    let n_wp = rng.random_range(cfg.min_waypoints..=cfg.max_waypoints);
    let [lo, hi] = cfg.position_range;
    let waypoints: Vec<Vec<f64>> = (0..n_wp)
        .map(|_| vec![rng.random_range(lo..=hi), rng.random_range(lo..=hi)])
        .collect();
    let sref = SplineReference::new(&waypoints, cfg.horizon)?;
    let dt = cfg.params.dt;
    let refs: Vec<DroneState> = sref
        .sample(cfg.horizon)
        .iter()
        .zip(sref.sample_derivative(cfg.horizon))
        .map(|(p, v)| DroneState {
            px: p[0],
            pz: p[1],
            vx: v[0] / dt,
            vz: v[1] / dt,
            ..DroneState::default()
        })
        .collect();

    let mut s = DroneState::at_rest(refs[0].px, refs[0].pz);
    let mut inputs = Vec::with_capacity(cfg.horizon);
    let mut outputs = Vec::with_capacity(cfg.horizon);
    let mut states = Vec::with_capacity(cfg.horizon);
    for k in 0..cfg.horizon {
        let err = ((s.px - refs[k].px).powi(2) + (s.pz - refs[k].pz).powi(2)).sqrt();
        if !s.is_finite() || err > cfg.divergence_distance || s.theta.abs() > std::f64::consts::FRAC_PI_2 {
            return Ok(None);
        }
        let u = match tracker.command(&s, &refs[k..]) {
            Ok(u) => u,
            Err(Error::Controller(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        inputs.push(u.to_vec());
        outputs.push(s.output().to_vec());
        states.push(s.to_array().to_vec());
        s = match drone_step(&s, u, &cfg.params) {
            Ok(next) => next,
            Err(Error::Numeric(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
    }
    let noise_seed = seed::derive(flight_seed, STREAM_NOISE, 0);
    let outputs = add_noise(&outputs, &cfg.noise_sigma, noise_seed)?;
    Ok(Some(Trajectory {
        id: String::new(),
        dt,
        inputs,
        outputs,
        true_states: Some(states),
    }))
}

/// Planar-drone dataset: spline references through random 2D waypoints tracked by the
/// receding-horizon LQ controller. Diverged flights are re-drawn with a fresh seed.
pub fn generate_drone_dataset(cfg: &DroneDataConfig, seed: u64) -> Result<Dataset> {
    cfg.params.validate()?;
    if cfg.min_waypoints < 2 || cfg.max_waypoints < cfg.min_waypoints || cfg.horizon < cfg.max_waypoints {
        return Err(Error::Config("invalid drone waypoint counts or horizon".into()));
    }
    let tracker = LqTracker::new(cfg.params, cfg.weights, cfg.lq_horizon, cfg.omega_max)?;
    let ids = layout(SystemKind::Drone2d, cfg.n_train, cfg.n_valid, cfg.n_test);
    let all = exec::map_range(ids.len(), |i| -> Result<Trajectory> {
        for attempt in 0..=cfg.max_resamples {
            let flight_seed = seed::derive(seed, STREAM_REFERENCE, ((i as u64) << 16) | attempt as u64);
            if let Some(mut t) = fly_drone(cfg, &tracker, flight_seed)? {
                t.id = ids[i].clone();
                return Ok(t);
            }
            log::warn!("flight {} diverged on attempt {attempt}; resampling", ids[i]);
        }
        Err(Error::Controller(format!(
            "flight {} diverged {} times",
            ids[i],
            cfg.max_resamples + 1
        )))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (train, valid, test) = split_three(all, cfg.n_train, cfg.n_valid);
    Dataset::new(SystemKind::Drone2d, 2, 3, cfg.params.dt, train, valid, test)
}
