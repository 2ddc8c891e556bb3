use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization recipe. Defaults are the full-length schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: u64,
    pub lr: f64,
    pub decay_step: u64,
    pub decay_factor: f64,
    pub weight_decay: f64,
    /// Distinct subjects per batch (P).
    pub subjects_per_batch: usize,
    /// Sequences drawn per subject (K).
    pub sequences_per_subject: usize,
    pub clip_len: usize,
    pub margin: f64,
    pub seed: u64,
    /// Adds the batch-all triplet term to the cross-entropy objective.
    pub use_triplet: bool,
    /// 0 disables periodic checkpoints; the final one is always written.
    pub checkpoint_every: u64,
    pub keep_checkpoints: usize,
    /// Permits batches other than 64 clips (desk-scale runs).
    pub allow_reduced_batch: bool,
}

/// Total clips per batch in the full-length recipe.
pub const CANONICAL_BATCH: usize = 64;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 80_000,
            lr: 1e-4,
            decay_step: 70_000,
            decay_factor: 0.1,
            weight_decay: 5e-4,
            subjects_per_batch: 16,
            sequences_per_subject: 4,
            clip_len: 60,
            margin: 0.2,
            seed: 0,
            use_triplet: true,
            checkpoint_every: 1000,
            keep_checkpoints: 3,
            allow_reduced_batch: false,
        }
    }
}

impl TrainConfig {
    pub fn batch_size(&self) -> usize {
        self.subjects_per_batch * self.sequences_per_subject
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("training.lr", "must be positive and finite"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return Err(Error::config("training.decay_factor", "must be positive and finite"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("training.weight_decay", "must be non-negative"));
        }
        // A zero-step run only writes the initial checkpoint, so the schedule is moot.
        if self.steps > 0 && self.decay_step >= self.steps {
            return Err(Error::config(
                "training.decay_step",
                format!("{} must be below steps = {}", self.decay_step, self.steps),
            ));
        }
        if self.subjects_per_batch < 2 {
            return Err(Error::config(
                "training.subjects_per_batch",
                "at least 2 subjects are needed for negatives",
            ));
        }
        if self.sequences_per_subject < 1 {
            return Err(Error::config("training.sequences_per_subject", "must be >= 1"));
        }
        if self.use_triplet && self.sequences_per_subject < 2 {
            return Err(Error::config(
                "training.sequences_per_subject",
                "the triplet term needs >= 2 sequences per subject for positives",
            ));
        }
        if self.clip_len == 0 {
            return Err(Error::config("training.clip_len", "must be >= 1"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::config("training.margin", "must be non-negative"));
        }
        if self.keep_checkpoints == 0 {
            return Err(Error::config("training.keep_checkpoints", "must be >= 1"));
        }
        Ok(())
    }

    /// The full-length recipe's batch of 64 clips.
    pub fn validate_canonical_batch(&self) -> Result<()> {
        if self.batch_size() != CANONICAL_BATCH {
            return Err(Error::config(
                "training.subjects_per_batch",
                format!(
                    "P·K = {}·{} = {}, expected {CANONICAL_BATCH} (set allow_reduced_batch for desk-scale runs)",
                    self.subjects_per_batch,
                    self.sequences_per_subject,
                    self.batch_size()
                ),
            ));
        }
        Ok(())
    }
}

/// Step-decayed learning rate: `lr` before `decay_step`, `lr·decay_factor` from it on.
pub fn lr_schedule(step: u64, cfg: &TrainConfig) -> Result<f64> {
    if step >= cfg.steps {
        return Err(Error::InvalidArgument(format!("step {step} outside 0..{}", cfg.steps)));
    }
    Ok(if step < cfg.decay_step {
        cfg.lr
    } else {
        cfg.lr * cfg.decay_factor
    })
}
