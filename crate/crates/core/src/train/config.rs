//! Training configuration, loadable from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use synclay_autograd::AdamConfig;

use super::losses::{LossWeights, TermMask};
use crate::error::{Error, Result};
use crate::nets::NetConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    /// Cap on generator steps per phase; `None` runs whole epochs.
    pub max_steps: Option<usize>,
    /// Sample grid every `k` epochs (0 disables).
    pub sample_every: usize,
    /// Checkpoint every `k` epochs (0 only at the end).
    pub checkpoint_every: usize,
    pub net: NetConfig,
    pub weights: LossWeights,
    pub terms: TermMask,
    pub segnet_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 1,
            phase1_epochs: 100,
            phase2_epochs: 20,
            max_steps: None,
            sample_every: 10,
            checkpoint_every: 10,
            net: NetConfig::default(),
            weights: LossWeights::default(),
            terms: TermMask::all(),
            segnet_epochs: 30,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size != 1 {
            return Err(Error::Config(format!("batch size {} unsupported; only 1", self.batch_size)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} {b} outside [0, 1)")));
            }
        }
        if self.net.mask_blocks != crate::nets::maskgen::MASK_BLOCKS {
            return Err(Error::Config("training needs 64 x 64 cell masks (mask_blocks = 6)".into()));
        }
        self.weights.validate()?;
        self.net.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
        }
    }

    /// Effective weights for `phase`: disabled terms zeroed, segmentation
    /// off in phase 1.
    pub fn phase_weights(&self, phase: u8) -> LossWeights {
        let mut w = self.weights.masked(&self.terms);
        if phase < 2 {
            w.seg = 0.0;
        }
        w
    }

    /// A desk-scale configuration on `size x size` tiles.
    pub fn smoke(size: usize) -> Self {
        Self {
            phase1_epochs: 1,
            phase2_epochs: 1,
            sample_every: 0,
            checkpoint_every: 0,
            net: NetConfig::small(size),
            segnet_epochs: 10,
            ..Self::default()
        }
    }
}
