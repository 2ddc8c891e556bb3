use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{
    layout_entries, save_checkpoint, Checkpoint, CheckpointManifest, RngState, CHECKPOINT_VERSION,
};
use super::config::{lr_schedule, TrainConfig};
use super::sampler::{sample_pk_batch, Batch, SubjectPool};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{
    backbone_forward, ce_loss, clip_tensor, total_loss, triplet_loss_batch, ModelConfig, ModelParameters, ParamVars,
};
use crate::numerics::{AdamConfig, AdamState, Graph, Tensor, Var};
use crate::seed::substream;

pub const LOSS_LOG_FILE: &str = "loss_log.csv";
pub const FINAL_CHECKPOINT_FILE: &str = "final.gckp";

/// Activation memory allowed for keeping every clip's tape alive between the
/// forward and backward passes; larger batches recompute the forward instead.
const DEFAULT_TAPE_BUDGET_BYTES: usize = 1 << 30;

/// One row of the loss log. `step` counts updates applied, starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub lr: f64,
    pub ce: f64,
    pub tri: f64,
    pub total: f64,
}

/// Parameters, optimizer, and sampling state of one training run.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    pool: SubjectPool,
    pub model: ModelConfig,
    pub config: TrainConfig,
    pub params: ModelParameters<f32>,
    pub adam: AdamState<f32>,
    rng: ChaCha8Rng,
    step: u64,
    tape_budget: usize,
}

struct ClipPass {
    graph: Option<Graph<f32>>,
    vars: Option<ParamVars>,
    embedding_var: Option<Var>,
    embedding: Tensor<f32>,
}

impl<'a> Trainer<'a> {
    /// Fresh run. `view` restricts training to one camera view.
    pub fn new(model: ModelConfig, config: TrainConfig, dataset: &'a Dataset, view: Option<u8>) -> Result<Self> {
        Self::check(&model, &config)?;
        let params = ModelParameters::init(&model, substream(config.seed, "init", 0))?;
        let adam = AdamState::new(
            Self::adam_config(&config),
            &params.tensors().iter().map(|t| t.shape()).collect::<Vec<_>>(),
        );
        let rng = ChaCha8Rng::seed_from_u64(substream(config.seed, "train", 0));
        Self::assemble(model, config, dataset, view, params, adam, rng, 0)
    }

    /// Continues from a checkpoint, restoring parameters, moments, RNG position and step.
    pub fn resume(ckpt: Checkpoint, config: TrainConfig, dataset: &'a Dataset, view: Option<u8>) -> Result<Self> {
        let model = ckpt.manifest.model.clone();
        Self::check(&model, &config)?;
        ckpt.check_model(&model)?;
        if ckpt.manifest.step > config.steps {
            return Err(Error::InvalidArgument(format!(
                "checkpoint is at step {} but the run has only {} steps",
                ckpt.manifest.step, config.steps
            )));
        }
        let rng = ckpt.manifest.rng.restore()?;
        let mut adam = ckpt.adam;
        adam.config = Self::adam_config(&config);
        Self::assemble(model, config, dataset, view, ckpt.params, adam, rng, ckpt.manifest.step)
    }

    fn check(model: &ModelConfig, config: &TrainConfig) -> Result<()> {
        model.validate()?;
        config.validate()?;
        if model.clip_len != config.clip_len {
            return Err(Error::config(
                "training.clip_len",
                format!("{} differs from model.clip_len = {}", config.clip_len, model.clip_len),
            ));
        }
        Ok(())
    }

    fn adam_config(config: &TrainConfig) -> AdamConfig {
        AdamConfig {
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        model: ModelConfig,
        config: TrainConfig,
        dataset: &'a Dataset,
        view: Option<u8>,
        params: ModelParameters<f32>,
        adam: AdamState<f32>,
        rng: ChaCha8Rng,
        step: u64,
    ) -> Result<Self> {
        let pool = SubjectPool::new(dataset, Split::Train, view)?;
        if !pool.has_both_classes() {
            return Err(Error::Data(
                "the training split must contain both risk and control subjects".into(),
            ));
        }
        if pool.len() < config.subjects_per_batch {
            return Err(Error::Data(format!(
                "training split has {} subjects, batch needs {}",
                pool.len(),
                config.subjects_per_batch
            )));
        }
        Ok(Self {
            dataset,
            pool,
            model,
            config,
            params,
            adam,
            rng,
            step,
            tape_budget: DEFAULT_TAPE_BUDGET_BYTES,
        })
    }

    pub fn with_tape_budget(mut self, bytes: usize) -> Self {
        self.tape_budget = bytes;
        self
    }

    /// Updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint {
            manifest: CheckpointManifest {
                format_version: CHECKPOINT_VERSION,
                model: self.model.clone(),
                training: self.config.clone(),
                step: self.step,
                rng: RngState::capture(&self.rng),
                adam: self.adam.config,
                adam_step: self.adam.step,
                entries: Vec::new(),
            },
            params: self.params.clone(),
            adam: self.adam.clone(),
        };
        ckpt.manifest.entries = layout_entries(&ckpt);
        ckpt
    }

    fn forward_clip(&self, clip: &Tensor<f32>, keep: bool) -> Result<ClipPass> {
        let mut g = Graph::new();
        let vars = ParamVars::attach(&mut g, &self.model, &self.params, keep)?;
        let x = g.leaf(clip.clone(), false);
        let e = backbone_forward(&mut g, &self.model, &vars, x)?.embedding;
        let embedding = g.value(e).clone();
        Ok(if keep {
            ClipPass {
                graph: Some(g),
                vars: Some(vars),
                embedding_var: Some(e),
                embedding,
            }
        } else {
            ClipPass {
                graph: None,
                vars: None,
                embedding_var: None,
                embedding,
            }
        })
    }

    /// Backbone gradients of one clip given the loss gradient at its embedding.
    fn backward_clip(&self, pass: ClipPass, clip: &Tensor<f32>, seed: Tensor<f32>) -> Result<Vec<Option<Tensor<f32>>>> {
        let pass = if pass.graph.is_some() {
            pass
        } else {
            self.forward_clip(clip, true)?
        };
        let (g, vars, e) = (pass.graph.unwrap(), pass.vars.unwrap(), pass.embedding_var.unwrap());
        let mut grads = g.backward_with(e, seed)?;
        Ok(vars.all.iter().map(|v| grads.take(*v)).collect())
    }

    /// Samples one batch, computes the objective and its gradient, applies one Adam update.
    pub fn train_step(&mut self) -> Result<StepLog> {
        let index = self.step;
        let lr = lr_schedule(index, &self.config)?;
        let batch: Batch = sample_pk_batch(
            self.dataset,
            &self.pool,
            self.config.subjects_per_batch,
            self.config.sequences_per_subject,
            self.config.clip_len,
            &mut self.rng,
        )?;
        let clips: Vec<Tensor<f32>> = batch.clips.iter().map(clip_tensor).collect();

        // Keep every tape when they fit in memory; otherwise recompute per clip.
        let first = self.forward_clip(&clips[0], true)?;
        let keep = first.graph.as_ref().map_or(0, Graph::value_bytes) * clips.len() <= self.tape_budget;
        let first = if keep {
            first
        } else {
            self.forward_clip(&clips[0], false)?
        };
        let mut passes = vec![first];
        let this = &*self;
        passes.extend(
            clips[1..]
                .par_iter()
                .map(|c| this.forward_clip(c, keep))
                .collect::<Result<Vec<_>>>()?,
        );

        let n = clips.len();
        let d = passes[0].embedding.numel();
        let mut flat = Vec::with_capacity(n * d);
        for p in &passes {
            flat.extend_from_slice(p.embedding.data());
        }

        let names = self.params.names();
        let head_w = names.iter().position(|s| s == "head.weight").expect("layout");
        let head_b = names.iter().position(|s| s == "head.bias").expect("layout");
        let mut bg = Graph::<f32>::new();
        let e = bg.leaf(Tensor::new(&[n, d], flat)?, true);
        let w = bg.leaf(self.params.tensors()[head_w].clone(), true);
        let b = bg.leaf(self.params.tensors()[head_b].clone(), true);
        let logits = bg.linear(e, w, b)?;
        let ce = ce_loss(&mut bg, logits, &batch.labels)?;
        let (tri, total) = if self.config.use_triplet {
            let t = triplet_loss_batch(&mut bg, e, &batch.subjects, self.config.margin)?;
            (Some(t), total_loss(&mut bg, ce, t)?)
        } else {
            (None, ce)
        };
        let log = StepLog {
            step: index + 1,
            lr,
            ce: bg.value(ce).item().into(),
            tri: tri.map_or(0.0, |t| bg.value(t).item().into()),
            total: bg.value(total).item().into(),
        };
        for (term, v) in [("cross-entropy", log.ce), ("triplet", log.tri), ("total", log.total)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{term} loss at step {} ({v})", log.step)));
            }
        }
        let mut bgrads = bg.backward(total)?;
        let de = bgrads.take(e).expect("embedding gradient");

        let seeds: Vec<Tensor<f32>> = de
            .data()
            .chunks(d)
            .map(|row| Tensor::new(&[d], row.to_vec()))
            .collect::<Result<_>>()?;
        let per_clip: Vec<Vec<Option<Tensor<f32>>>> = passes
            .into_par_iter()
            .zip(clips.par_iter())
            .zip(seeds.into_par_iter())
            .map(|((p, c), s)| this.backward_clip(p, c, s))
            .collect::<Result<_>>()?;

        // Sum in clip order so the result does not depend on scheduling.
        let mut grads: Vec<Tensor<f32>> = self.params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        for clip_grads in &per_clip {
            for (acc, g) in grads.iter_mut().zip(clip_grads) {
                if let Some(g) = g {
                    for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += *v;
                    }
                }
            }
        }
        grads[head_w] = bgrads.take(w).expect("head weight gradient");
        grads[head_b] = bgrads.take(b).expect("head bias gradient");

        let grad_refs: Vec<&Tensor<f32>> = grads.iter().collect();
        let mut param_refs: Vec<&mut Tensor<f32>> = self.params.tensors_mut().iter_mut().collect();
        self.adam.step(&mut param_refs, &grad_refs, lr)?;
        self.step += 1;
        Ok(log)
    }
}

/// Append-only CSV of [`StepLog`] rows.
pub struct LossLog {
    writer: csv::Writer<fs::File>,
    path: PathBuf,
}

impl LossLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(["step", "lr", "ce", "tri", "total"])?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
        })
    }

    /// Reopens an existing log, dropping rows past `step` (left by a run that
    /// outlived its last checkpoint).
    pub fn resume(path: &Path, step: u64) -> Result<Self> {
        let kept: Vec<StepLog> = if path.exists() {
            read_loss_log(path)?.into_iter().filter(|r| r.step <= step).collect()
        } else {
            Vec::new()
        };
        let mut log = Self::create(path)?;
        for r in &kept {
            log.append(r)?;
        }
        Ok(log)
    }

    pub fn append(&mut self, row: &StepLog) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_loss_log(path: &Path) -> Result<Vec<StepLog>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// What a completed run leaves behind.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub log: Vec<StepLog>,
}

fn periodic_name(step: u64) -> String {
    format!("step-{step:08}.gckp")
}

fn prune_checkpoints(dir: &Path, keep: usize) -> Result<()> {
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("step-") && n.ends_with(".gckp"))
        })
        .collect();
    found.sort();
    let excess = found.len().saturating_sub(keep);
    for p in &found[..excess] {
        fs::remove_file(p).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

/// Runs `trainer` to completion, writing the loss log and checkpoints under `out_dir`.
pub fn run_training(trainer: &mut Trainer, out_dir: &Path, mut on_step: impl FnMut(&StepLog)) -> Result<TrainOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join(LOSS_LOG_FILE);
    let mut log_file = if trainer.step() == 0 {
        LossLog::create(&log_path)?
    } else {
        LossLog::resume(&log_path, trainer.step())?
    };
    let mut rows = Vec::new();
    while !trainer.is_finished() {
        let row = trainer.train_step()?;
        log_file.append(&row)?;
        on_step(&row);
        rows.push(row);
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.step().is_multiple_of(every) && !trainer.is_finished() {
            save_checkpoint(&out_dir.join(periodic_name(trainer.step())), &trainer.checkpoint())?;
            prune_checkpoints(out_dir, trainer.config.keep_checkpoints)?;
        }
    }
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT_FILE);
    save_checkpoint(&final_checkpoint, &trainer.checkpoint())?;
    Ok(TrainOutcome {
        final_checkpoint,
        loss_log: log_path,
        log: rows,
    })
}

/// Trains from scratch on the train split and returns the final state.
pub fn train(model: ModelConfig, config: TrainConfig, dataset: &Dataset, out_dir: &Path) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model, config, dataset, None)?;
    run_training(&mut trainer, out_dir, |_| {})
}
