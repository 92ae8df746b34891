use std::path::Path;

use dynoid::datagen::{DroneDataConfig, SystemKind, TankDataConfig};
use dynoid::diagnostics::BoundCheckConfig;
use dynoid::reduction::AeTrainConfig;
use dynoid::regressor::TrainConfig;
use dynoid::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything an experiment needs. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub seed: u64,
    pub windows: Vec<usize>,
    /// Free-run steps scored per test trajectory.
    pub horizon: usize,
    pub rates: Vec<f64>,
    pub tank: TankDataConfig,
    pub drone: DroneDataConfig,
    pub train: TrainConfig,
    pub autoencoder: AeTrainConfig,
    pub diagnostics: BoundCheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Tank,
            seed: 0,
            windows: vec![5, 10, 15, 20, 25, 30],
            horizon: 100,
            rates: vec![0.15, 0.3, 0.45, 0.6, 0.75, 0.9],
            tank: TankDataConfig::default(),
            drone: DroneDataConfig::default(),
            train: TrainConfig::default(),
            autoencoder: AeTrainConfig::default(),
            diagnostics: BoundCheckConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable config");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Error::Config("window sizes must be a non-empty list of values >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("compression rate {r} is outside [0, 1]")));
        }
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_fills_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 9, "windows": [3]}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.windows, vec![3]);
        assert_eq!(c.horizon, 100);
        assert_eq!(c.train, TrainConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sead": 9}"#).is_err());
    }

    #[test]
    fn zero_window_invalid() {
        let c = ExperimentConfig {
            windows: vec![5, 0],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
