//! Experiment orchestration behind the `oodratio` binary.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use config::{ExperimentConfig, OracleConfig};

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub sigma: Option<f64>,
}

impl Overrides {
    pub fn apply_experiment(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        cfg.train.seed = cfg.seed;
    }

    pub fn apply_oracle(&self, cfg: &mut OracleConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        cfg.train.seed = cfg.seed;
    }
}
