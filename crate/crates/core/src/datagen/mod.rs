//! Closed-loop data collection and the dataset format.
//!
//! A dataset is a header (`header.json`: system, dimensions, split membership and
//! train-split normalization) plus one JSON trajectory record per line
//! (`dataset.jsonl`). Simulated trajectories carry their true states for diagnostics;
//! nothing in the identification pipeline reads them.

mod generate;
mod io;

use serde::{Deserialize, Serialize};

pub use generate::{generate_drone_dataset, generate_tank_dataset, DroneDataConfig, TankDataConfig};
pub use io::{load_dataset, save_dataset, DATASET_FORMAT_VERSION, HEADER_FILE, RECORDS_FILE};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Tank,
    Drone2d,
}

impl SystemKind {
    pub const ALL: [SystemKind; 2] = [SystemKind::Tank, SystemKind::Drone2d];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Tank => "tank",
            SystemKind::Drone2d => "drone2d",
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown system {s:?}; valid systems: tank, drone2d")))
    }
}

/// One closed-loop run: time-aligned inputs and measured outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub dt: f64,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub true_states: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn validate(&self, n_u: usize, n_y: usize) -> Result<()> {
        let t = self.outputs.len();
        if t == 0 {
            return Err(Error::Usage(format!("trajectory {} is empty", self.id)));
        }
        if self.inputs.len() != t {
            return Err(Error::shape("trajectory inputs", t, self.inputs.len()));
        }
        if let Some(x) = &self.true_states {
            if x.len() != t {
                return Err(Error::shape("trajectory states", t, x.len()));
            }
        }
        for (u, y) in self.inputs.iter().zip(&self.outputs) {
            if u.len() != n_u {
                return Err(Error::shape("input row", n_u, u.len()));
            }
            if y.len() != n_y {
                return Err(Error::shape("output row", n_y, y.len()));
            }
            if u.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("trajectory {}", self.id)));
            }
        }
        Ok(())
    }
}

/// Per-channel affine normalization computed on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub u_mean: Vec<f64>,
    pub u_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

fn channel_stats<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    // Welford, one pass.
    for row in rows {
        n += 1;
        for c in 0..dim {
            let d = row[c] - mean[c];
            mean[c] += d / n as f64;
            m2[c] += d * (row[c] - mean[c]);
        }
    }
    let std = m2
        .iter()
        .map(|&s| {
            let sd = if n > 0 { (s / n as f64).sqrt() } else { 0.0 };
            if sd > 1e-12 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

impl Normalization {
    pub fn identity(n_u: usize, n_y: usize) -> Self {
        Self {
            u_mean: vec![0.0; n_u],
            u_std: vec![1.0; n_u],
            y_mean: vec![0.0; n_y],
            y_std: vec![1.0; n_y],
        }
    }

    /// Mean and population standard deviation over every time step of `trajectories`.
    /// Constant channels get unit scale.
    pub fn fit(trajectories: &[Trajectory], n_u: usize, n_y: usize) -> Self {
        let (u_mean, u_std) = channel_stats(trajectories.iter().flat_map(|t| &t.inputs), n_u);
        let (y_mean, y_std) = channel_stats(trajectories.iter().flat_map(|t| &t.outputs), n_y);
        Self {
            u_mean,
            u_std,
            y_mean,
            y_std,
        }
    }

    pub fn n_u(&self) -> usize {
        self.u_mean.len()
    }

    pub fn n_y(&self) -> usize {
        self.y_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_std.len() != self.u_mean.len() || self.y_std.len() != self.y_mean.len() {
            return Err(Error::Config("normalization mean/std lengths differ".into()));
        }
        let ok = self
            .u_std
            .iter()
            .chain(&self.y_std)
            .all(|s| s.is_finite() && *s > 0.0)
            && self.u_mean.iter().chain(&self.y_mean).all(|m| m.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("normalization scales must be finite and positive".into()))
        }
    }

    pub fn normalize_u_into(&self, u: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(u).zip(&self.u_mean).zip(&self.u_std) {
            *o = (v - m) / s;
        }
    }

    pub fn normalize_y_into(&self, y: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(y).zip(&self.y_mean).zip(&self.y_std) {
            *o = (v - m) / s;
        }
    }

    pub fn normalize_u(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.normalize_u_into(u, &mut out);
        out
    }

    pub fn normalize_y(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.normalize_y_into(y, &mut out);
        out
    }

    pub fn denormalize_u(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.u_mean)
            .zip(&self.u_std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn denormalize_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.y_mean)
            .zip(&self.y_std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemKind,
    pub n_u: usize,
    pub n_y: usize,
    pub dt: f64,
    pub train: Vec<Trajectory>,
    pub valid: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl Dataset {
    /// Assemble a dataset, fitting the normalization on `train`.
    pub fn new(
        system: SystemKind,
        n_u: usize,
        n_y: usize,
        dt: f64,
        train: Vec<Trajectory>,
        valid: Vec<Trajectory>,
        test: Vec<Trajectory>,
    ) -> Result<Self> {
        let normalization = Normalization::fit(&train, n_u, n_y);
        let ds = Self {
            system,
            n_u,
            n_y,
            dt,
            train,
            valid,
            test,
            normalization,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn split(&self, split: Split) -> &[Trajectory] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if self.normalization.n_u() != self.n_u || self.normalization.n_y() != self.n_y {
            return Err(Error::Config("normalization dims do not match the dataset".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for t in self.trajectories() {
            t.validate(self.n_u, self.n_y)?;
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Config(format!("trajectory id {} appears twice", t.id)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: &str, ys: &[f64]) -> Trajectory {
        Trajectory {
            id: id.into(),
            dt: 1.0,
            inputs: ys.iter().map(|y| vec![2.0 * y + 1.0]).collect(),
            outputs: ys.iter().map(|&y| vec![y]).collect(),
            true_states: None,
        }
    }

    #[test]
    fn normalization_round_trip() {
        let n = Normalization::fit(&[traj("a", &[0.0, 1.0, 4.0]), traj("b", &[2.5, -1.0])], 1, 1);
        for y in [-3.0, 0.0, 1.7, 123.456] {
            let back = n.denormalize_y(&n.normalize_y(&[y]))[0];
            assert!((back - y).abs() < 1e-12);
            let ub = n.denormalize_u(&n.normalize_u(&[y]))[0];
            assert!((ub - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_statistics() {
        let n = Normalization::fit(&[traj("a", &[1.0, 3.0])], 1, 1);
        assert_eq!(n.y_mean, vec![2.0]);
        assert_eq!(n.y_std, vec![1.0]);
        assert_eq!(n.u_mean, vec![5.0]);
        assert_eq!(n.u_std, vec![2.0]);
    }

    #[test]
    fn constant_channel_gets_unit_scale() {
        let n = Normalization::fit(&[traj("a", &[3.0, 3.0, 3.0])], 1, 1);
        assert_eq!(n.y_std, vec![1.0]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = Dataset::new(
            SystemKind::Tank,
            1,
            1,
            1.0,
            vec![traj("a", &[1.0, 2.0])],
            vec![traj("a", &[1.0])],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn system_names() {
        assert_eq!("drone2d".parse::<SystemKind>().unwrap(), SystemKind::Drone2d);
        let err = "quad".parse::<SystemKind>().unwrap_err().to_string();
        assert!(err.contains("tank") && err.contains("drone2d"));
    }
}
