//! One declarative experiment file (TOML) driving every command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{RunSpec, DEFAULT_THRESHOLD};
use crate::model::ModelConfig;
use crate::seed::substream;
use crate::synth::GeneratorConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub threshold: f64,
    /// Views broken out in evaluation reports.
    pub views: Vec<u8>,
    /// Temporal kernel sizes of the ablation grid.
    pub taus: Vec<usize>,
    pub triplet: Vec<bool>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            views: (1..=6).collect(),
            taus: vec![3, 5, 7],
            triplet: vec![true, false],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data_dir: PathBuf,
    pub run_dir: PathBuf,
    pub eval_dir: PathBuf,
    pub ablation_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            run_dir: "runs/train".into(),
            eval_dir: "runs/eval".into(),
            ablation_dir: "runs/ablation".into(),
        }
    }
}

/// Section seeds are not read from the file: every stream derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub evaluation: EvaluationConfig,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ExperimentConfig {
    /// Full-size model and the 80k-step recipe.
    pub fn canonical() -> Self {
        Self {
            seed: 0,
            generator: GeneratorConfig::default(),
            model: ModelConfig::canonical(),
            training: TrainConfig::default(),
            evaluation: EvaluationConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    /// Canonical clip geometry, narrow widths, 8-clip batches, 5000 steps:
    /// trains in well under an hour on one CPU core.
    pub fn desk() -> Self {
        let mut cfg = Self::canonical();
        cfg.generator.n_subjects = 100;
        cfg.model = ModelConfig::with_channels([2, 4, 8]);
        cfg.training = TrainConfig {
            steps: 5000,
            decay_step: 4000,
            lr: 1e-3,
            subjects_per_batch: 4,
            sequences_per_subject: 2,
            allow_reduced_batch: true,
            ..TrainConfig::default()
        };
        cfg
    }

    /// Desk model on a 40-subject corpus for 500 steps; sized for running the
    /// six-cell ablation grid end to end. The higher rate keeps the loss falling
    /// visibly within the short schedule.
    pub fn smoke() -> Self {
        let mut cfg = Self::desk();
        cfg.generator.n_subjects = 40;
        cfg.training.steps = 500;
        cfg.training.decay_step = 400;
        cfg.training.lr = 5e-3;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::config(field, format!("{}: {message}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: substream(self.seed, "gen", 0),
            ..self.generator.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: substream(self.seed, "train", 0),
            ..self.training.clone()
        }
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            model: self.model.clone(),
            training: self.train_config(),
            threshold: self.evaluation.threshold,
        }
    }

    /// Every section against its invariants; runs before any command touches data.
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.model.validate()?;
        self.training.validate()?;
        if !self.training.allow_reduced_batch {
            self.training.validate_canonical_batch()?;
        }
        if self.training.clip_len != self.model.clip_len {
            return Err(Error::config(
                "training.clip_len",
                format!(
                    "{} differs from model.clip_len = {}",
                    self.training.clip_len, self.model.clip_len
                ),
            ));
        }
        if self.training.margin != self.model.margin {
            return Err(Error::config(
                "training.margin",
                format!(
                    "{} differs from model.margin = {}",
                    self.training.margin, self.model.margin
                ),
            ));
        }
        let ev = &self.evaluation;
        if !(0.0..=1.0).contains(&ev.threshold) {
            return Err(Error::config("evaluation.threshold", "must lie in [0, 1]"));
        }
        if let Some(v) = ev.views.iter().find(|v| !(1..=6).contains(*v)) {
            return Err(Error::config("evaluation.views", format!("view {v} outside 1..=6")));
        }
        if let Some(t) = ev.taus.iter().find(|t| **t == 0 || **t % 2 == 0) {
            return Err(Error::config(
                "evaluation.taus",
                format!("temporal kernel {t} must be odd"),
            ));
        }
        if ev.taus.is_empty() || ev.triplet.is_empty() {
            return Err(Error::config("evaluation.taus", "ablation grid must be non-empty"));
        }
        Ok(())
    }
}
