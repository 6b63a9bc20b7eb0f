use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::dpp::{DEFAULT_EPS, DEFAULT_SIGN_TOL};
use crate::error::{Error, Result};
use crate::reward::RewardMode;

/// Hyperparameters for both training phases.
///
/// `Default` carries the full-scale protocol (100 + 100 epochs, Adam at
/// 4e-4). [`TrainConfig::desk`] is the shipped small-corpus preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub xe_epochs: usize,
    pub rl_epochs: usize,
    /// Adam step size for the RL phase.
    pub learning_rate: f64,
    /// Adam step size for the cross-entropy phase.
    pub xe_learning_rate: f64,
    /// Samples drawn per image per RL step.
    pub m: usize,
    pub mode: RewardMode,
    pub eps: f64,
    pub tol: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Subtract the greedy caption's CIDEr from SCST quality scores.
    pub scst_baseline: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            xe_epochs: 100,
            rl_epochs: 100,
            learning_rate: 4e-4,
            xe_learning_rate: 4e-4,
            m: 5,
            mode: RewardMode::Rdpp,
            eps: DEFAULT_EPS,
            tol: DEFAULT_SIGN_TOL,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            scst_baseline: false,
        }
    }
}

impl TrainConfig {
    /// Preset for the default synthetic corpus: 30 + 30 epochs.
    ///
    /// Every context owns its own logits, so a context only sees one update
    /// per epoch per reference; the step size is raised accordingly.
    pub fn desk() -> Self {
        TrainConfig {
            xe_epochs: 30,
            rl_epochs: 30,
            learning_rate: DESK_LEARNING_RATE,
            xe_learning_rate: DESK_XE_LEARNING_RATE,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        for (name, lr) in [("learning_rate", self.learning_rate), ("xe_learning_rate", self.xe_learning_rate)] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.eps >= 0.0) || !(self.tol >= 0.0) {
            return Err(Error::Config("eps and tol must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Adam settings for the RL phase, or the XE phase when `xe` is set.
    pub fn adam(&self, xe: bool) -> AdamConfig {
        AdamConfig {
            learning_rate: if xe { self.xe_learning_rate } else { self.learning_rate },
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

pub const DESK_LEARNING_RATE: f64 = 0.05;
pub const DESK_XE_LEARNING_RATE: f64 = 0.3;
