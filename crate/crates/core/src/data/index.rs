use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scores::{assign_group, grade_phq, grade_sds, Grade, Group, RiskLabel};
use super::sequence::{SequenceMeta, SilhouetteSequence};
use crate::error::{Error, Result};

pub const INDEX_FILE_NAME: &str = "index.json";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub sds: u32,
    pub phq9: u32,
    pub group: Group,
    pub sds_grade: Grade,
    pub phq_grade: Grade,
}

impl SubjectRecord {
    /// Derives group and grades from the two scale scores.
    pub fn from_scores(subject_id: impl Into<String>, sds: u32, phq9: u32) -> Result<Self> {
        Ok(Self {
            subject_id: subject_id.into(),
            sds,
            phq9,
            group: assign_group(sds, phq9)?,
            sds_grade: grade_sds(sds)?,
            phq_grade: grade_phq(phq9)?,
        })
    }

    pub fn label(&self) -> Option<RiskLabel> {
        self.group.label()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceEntry {
    #[serde(flatten)]
    pub meta: SequenceMeta,
    /// Relative to the directory holding the index file.
    pub path: PathBuf,
    pub frames: u32,
}

/// Subjects, their sequence files, and the subject-level train/test split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub subjects: Vec<SubjectRecord>,
    pub sequences: Vec<SequenceEntry>,
    #[serde(default)]
    pub split: BTreeMap<String, Split>,
}

impl DatasetIndex {
    pub fn new(subjects: Vec<SubjectRecord>, sequences: Vec<SequenceEntry>) -> Self {
        Self {
            version: INDEX_FORMAT_VERSION,
            subjects,
            sequences,
            split: BTreeMap::new(),
        }
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != INDEX_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let mut ids = BTreeSet::new();
        for s in &self.subjects {
            if !ids.insert(s.subject_id.as_str()) {
                return Err(Error::Data(format!("duplicate subject {}", s.subject_id)));
            }
            let derived = SubjectRecord::from_scores(s.subject_id.clone(), s.sds, s.phq9)?;
            if &derived != s {
                return Err(Error::Data(format!(
                    "subject {} labels disagree with its scores",
                    s.subject_id
                )));
            }
        }
        for e in &self.sequences {
            e.meta.validate()?;
            if !ids.contains(e.meta.subject_id.as_str()) {
                return Err(Error::Data(format!(
                    "sequence {:?} references unknown subject {}",
                    e.path, e.meta.subject_id
                )));
            }
        }
        for id in self.split.keys() {
            match self.subject(id) {
                None => return Err(Error::Data(format!("split references unknown subject {id}"))),
                Some(s) if s.group == Group::Excluded => {
                    return Err(Error::Data(format!("excluded subject {id} assigned to a split")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn subjects_in(&self, split: Split) -> Vec<&SubjectRecord> {
        self.subjects
            .iter()
            .filter(|s| self.split.get(&s.subject_id) == Some(&split))
            .collect()
    }

    pub fn sequences_in(&self, split: Split) -> Vec<&SequenceEntry> {
        self.sequences
            .iter()
            .filter(|e| self.split.get(&e.meta.subject_id) == Some(&split))
            .collect()
    }

    /// Random subject-level partition of the labelled subjects, stratified by
    /// class. Excluded subjects stay in the index without a split.
    pub fn split_subjects(&self, train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for s in &self.subjects {
            if let Some(label) = s.label() {
                by_class.entry(label.class_index()).or_default().push(&s.subject_id);
            }
        }
        let total: usize = by_class.values().map(Vec::len).sum();
        if total < 2 {
            return Err(Error::Data(format!(
                "need at least 2 labelled subjects to split, have {total}"
            )));
        }
        let n_train = ((total as f64 * train_fraction).round() as usize).clamp(1, total - 1);

        // Largest-remainder apportionment of the train quota across classes.
        let exact: Vec<(usize, f64)> = by_class
            .iter()
            .map(|(c, v)| (*c, v.len() as f64 * n_train as f64 / total as f64))
            .collect();
        let mut quota: BTreeMap<usize, usize> = exact.iter().map(|(c, x)| (*c, x.floor() as usize)).collect();
        let mut leftover = n_train - quota.values().sum::<usize>();
        let mut order: Vec<(usize, f64)> = exact.iter().map(|(c, x)| (*c, x - x.floor())).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (c, _) in order {
            if leftover == 0 {
                break;
            }
            *quota.get_mut(&c).unwrap() += 1;
            leftover -= 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut split = BTreeMap::new();
        for (c, ids) in &by_class {
            let mut ids = ids.clone();
            ids.shuffle(&mut rng);
            for (i, id) in ids.into_iter().enumerate() {
                let which = if i < quota[c] { Split::Train } else { Split::Test };
                split.insert(id.to_string(), which);
            }
        }
        let mut out = self.clone();
        out.split = split;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: Self = serde_json::from_str(&text)?;
        index.validate()?;
        Ok(index)
    }
}

/// An index with all of its sequences resident in memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub index: DatasetIndex,
    pub sequences: Vec<SilhouetteSequence>,
}

impl Dataset {
    pub fn new(index: DatasetIndex, sequences: Vec<SilhouetteSequence>) -> Result<Self> {
        index.validate()?;
        if index.sequences.len() != sequences.len() {
            return Err(Error::Data(format!(
                "{} index entries but {} sequences",
                index.sequences.len(),
                sequences.len()
            )));
        }
        for (e, s) in index.sequences.iter().zip(&sequences) {
            if e.meta != s.meta || e.frames as usize != s.len() {
                return Err(Error::Data(format!(
                    "sequence {:?} does not match its index entry",
                    e.path
                )));
            }
        }
        Ok(Self { index, sequences })
    }

    /// Loads `index.json` from `dir` (or the given file) and every sequence it lists.
    pub fn load(path: &Path) -> Result<Self> {
        let index_path = if path.is_dir() {
            path.join(INDEX_FILE_NAME)
        } else {
            path.to_path_buf()
        };
        let root = index_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let index = DatasetIndex::load(&index_path)?;
        let sequences = index
            .sequences
            .iter()
            .map(|e| SilhouetteSequence::read(&root.join(&e.path)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(index, sequences)
    }

    pub fn label_of(&self, seq: usize) -> Option<RiskLabel> {
        self.index
            .subject(&self.sequences[seq].meta.subject_id)
            .and_then(SubjectRecord::label)
    }

    /// Sequence indices belonging to `split`, optionally restricted to one view.
    pub fn sequence_ids(&self, split: Split, view: Option<u8>) -> Vec<usize> {
        self.sequences
            .iter()
            .enumerate()
            .filter(|(_, s)| self.index.split.get(&s.meta.subject_id) == Some(&split))
            .filter(|(_, s)| view.is_none_or(|v| s.meta.view_id == v))
            .map(|(i, _)| i)
            .collect()
    }

    /// Replaces the split.
    pub fn with_split(mut self, train_fraction: f64, seed: u64) -> Result<Self> {
        self.index = self.index.split_subjects(train_fraction, seed)?;
        Ok(self)
    }
}
