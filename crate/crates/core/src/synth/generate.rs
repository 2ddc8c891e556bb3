use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{render_sequence, CameraView, Shot};
use super::walker::{sample_walker_params, ClassDistribution, WalkerParams};
use crate::data::{
    Attire, Dataset, DatasetIndex, Direction, RiskLabel, SequenceEntry, SilhouetteSequence, SubjectRecord,
    INDEX_FILE_NAME,
};
use crate::error::{Error, Result};
use crate::seed::substream;

pub const SEQUENCES_PER_SUBJECT: usize = 36;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_subjects: usize,
    pub seed: u64,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Fraction of labelled subjects assigned to the training split.
    pub train_fraction: f64,
    pub distribution: ClassDistribution,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_subjects: 40,
            seed: 0,
            min_frames: 90,
            max_frames: 150,
            train_fraction: 831.0 / 1227.0,
            distribution: ClassDistribution::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::config("generator.n_subjects", "need at least 2 subjects"));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::config(
                "generator.min_frames",
                format!("invalid frame range {}..={}", self.min_frames, self.max_frames),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("generator.train_fraction", "must lie in (0, 1)"));
        }
        self.distribution.validate()
    }
}

pub fn subject_id(i: usize) -> String {
    format!("S{i:04}")
}

/// Subject `i` is at-risk for even `i`, so classes are balanced to within one.
pub fn subject_label(i: usize) -> RiskLabel {
    if i.is_multiple_of(2) {
        RiskLabel::Risk
    } else {
        RiskLabel::Control
    }
}

/// Scale scores consistent with the cohort thresholds of `label`.
fn sample_scores(label: RiskLabel, rng: &mut impl Rng) -> (u32, u32) {
    match label {
        RiskLabel::Risk => (rng.gen_range(59..=80), rng.gen_range(9..=27)),
        RiskLabel::Control => (rng.gen_range(20..=46), rng.gen_range(0..=1)),
    }
}

/// The 36 (view, attire, direction) combinations in file order.
pub fn shot_grid() -> Vec<(u8, Attire, Direction)> {
    let mut grid = Vec::with_capacity(SEQUENCES_PER_SUBJECT);
    for view in 1..=6u8 {
        for attire in Attire::ALL {
            for direction in Direction::ALL {
                grid.push((view, attire, direction));
            }
        }
    }
    grid
}

fn jitter(params: &WalkerParams, rng: &mut impl Rng) -> WalkerParams {
    let mut n = || {
        // Sum of uniforms: cheap, bounded, roughly Gaussian with unit variance.
        (0..3).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>()
    };
    let mut p = *params;
    p.gait_period = (p.gait_period * (1.0 + 0.02 * n())).max(WalkerParams::MIN_PERIOD);
    p.walk_speed = (p.walk_speed * (1.0 + 0.03 * n())).max(0.0);
    p.head_bob_amplitude = (p.head_bob_amplitude * (1.0 + 0.05 * n())).max(0.0);
    p.arm_swing_amplitude = (p.arm_swing_amplitude * (1.0 + 0.05 * n())).max(0.0);
    p.leg_swing_amplitude = (p.leg_swing_amplitude * (1.0 + 0.03 * n())).max(0.0);
    p
}

struct SubjectCorpus {
    record: SubjectRecord,
    sequences: Vec<SilhouetteSequence>,
}

fn render_subject(cfg: &GeneratorConfig, i: usize) -> Result<SubjectCorpus> {
    let label = subject_label(i);
    let id = subject_id(i);
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "subject", i as u64));
    let (sds, phq9) = sample_scores(label, &mut rng);
    let record = SubjectRecord::from_scores(id.clone(), sds, phq9)?;
    debug_assert_eq!(record.label(), Some(label));
    let params = sample_walker_params(label, &cfg.distribution, &mut rng)?;
    let sequences = shot_grid()
        .into_iter()
        .enumerate()
        .map(|(k, (view, attire, direction))| {
            let mut srng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, &id, k as u64));
            let shot = Shot {
                view: CameraView::from_id(view)?,
                attire,
                direction,
                frames: srng.gen_range(cfg.min_frames..=cfg.max_frames),
                phase: srng.gen_range(0.0..std::f64::consts::TAU),
            };
            render_sequence(&jitter(&params, &mut srng), &shot, &id)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectCorpus { record, sequences })
}

pub fn sequence_path(seq: &SilhouetteSequence) -> PathBuf {
    let attire = match seq.meta.attire {
        Attire::Coat => "coat",
        Attire::NoCoat => "nocoat",
        Attire::Backpack => "backpack",
    };
    let dir = match seq.meta.direction {
        Direction::Toward => "toward",
        Direction::Away => "away",
    };
    PathBuf::from("sequences")
        .join(&seq.meta.subject_id)
        .join(format!("v{}_{attire}_{dir}.gseq", seq.meta.view_id))
}

/// Renders the whole corpus in memory and applies the seeded subject split.
pub fn generate_in_memory(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let corpora = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| render_subject(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let mut subjects = Vec::with_capacity(corpora.len());
    let mut entries = Vec::new();
    let mut sequences = Vec::new();
    for c in corpora {
        subjects.push(c.record);
        for s in c.sequences {
            entries.push(SequenceEntry {
                meta: s.meta.clone(),
                path: sequence_path(&s),
                frames: s.len() as u32,
            });
            sequences.push(s);
        }
    }
    let index =
        DatasetIndex::new(subjects, entries).split_subjects(cfg.train_fraction, substream(cfg.seed, "split", 0))?;
    Dataset::new(index, sequences)
}

/// Renders the corpus, writes every sequence file plus `index.json` under
/// `out_dir`, and returns the in-memory dataset.
pub fn generate_dataset(cfg: &GeneratorConfig, out_dir: &Path) -> Result<Dataset> {
    let dataset = generate_in_memory(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    dataset
        .index
        .sequences
        .par_iter()
        .zip(dataset.sequences.par_iter())
        .try_for_each(|(entry, seq)| -> Result<()> {
            let path = out_dir.join(&entry.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            seq.write(&path)
        })?;
    dataset.index.save(&out_dir.join(INDEX_FILE_NAME))?;
    Ok(dataset)
}
