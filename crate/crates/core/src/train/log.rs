use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRAIN_LOG_HEADER: &str = "epoch,mode,m,mean_reward,mean_cider,self_cider,seconds";

/// One epoch of training statistics.
///
/// For the cross-entropy phase `mean_reward` is the mean reference
/// log-likelihood; for RL it is the mean set reward. `mean_cider` and
/// `self_cider` are computed on the captions sampled during the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mode: String,
    pub m: usize,
    pub mean_reward: f64,
    pub mean_cider: f64,
    pub self_cider: f64,
    /// Mean `log det(L + eps I)` over sampled sets; absent for the XE phase.
    pub mean_log_det: Option<f64>,
    /// Images whose RL step was skipped after a numerical failure.
    pub skipped: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Equality ignoring wall-clock time.
    pub fn same_run(&self, other: &TrainLog) -> bool {
        let strip = |l: &TrainLog| -> Vec<EpochRecord> {
            l.records
                .iter()
                .cloned()
                .map(|mut r| {
                    r.seconds = 0.0;
                    r
                })
                .collect()
        };
        strip(self) == strip(other)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAIN_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.mode, r.m, r.mean_reward, r.mean_cider, r.self_cider, r.seconds
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
