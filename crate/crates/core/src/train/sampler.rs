use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::data::{Dataset, RiskLabel, SilhouetteSequence, Split};
use crate::error::{Error, Result};

/// Training sequences grouped by subject, in a fixed subject order.
#[derive(Clone, Debug)]
pub struct SubjectPool {
    subjects: Vec<(String, RiskLabel, Vec<usize>)>,
}

impl SubjectPool {
    /// Labelled subjects of `split`, optionally restricted to one view.
    pub fn new(dataset: &Dataset, split: Split, view: Option<u8>) -> Result<Self> {
        let mut by_subject: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for i in dataset.sequence_ids(split, view) {
            if dataset.label_of(i).is_some() {
                by_subject
                    .entry(dataset.sequences[i].meta.subject_id.clone())
                    .or_default()
                    .push(i);
            }
        }
        let subjects = by_subject
            .into_iter()
            .map(|(id, seqs)| {
                let label = dataset.label_of(seqs[0]).expect("filtered above");
                (id, label, seqs)
            })
            .collect();
        Ok(Self { subjects })
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        let risk = self.subjects.iter().filter(|s| s.1.is_risk()).count();
        risk > 0 && risk < self.subjects.len()
    }
}

/// `P·K` clips; `subjects[i]` indexes the batch's distinct subjects.
#[derive(Clone, Debug)]
pub struct Batch {
    pub clips: Vec<SilhouetteSequence>,
    pub subjects: Vec<usize>,
    pub labels: Vec<RiskLabel>,
    pub subject_ids: Vec<String>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Draws `p` distinct subjects uniformly, then `k` sequences from each (with
/// replacement only when a subject has fewer than `k`), then one random clip
/// of `clip_len` frames per sequence.
pub fn sample_pk_batch<R: Rng + ?Sized>(
    dataset: &Dataset,
    pool: &SubjectPool,
    p: usize,
    k: usize,
    clip_len: usize,
    rng: &mut R,
) -> Result<Batch> {
    if pool.len() < 2 {
        return Err(Error::Data(format!(
            "PK sampling needs >= 2 subjects, found {}",
            pool.len()
        )));
    }
    if pool.len() < p {
        return Err(Error::Data(format!(
            "batch asks for {p} subjects but only {} are available",
            pool.len()
        )));
    }
    // negatives need a second subject; positives (k >= 2) matter only with the triplet term
    if p < 2 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "PK batch needs p >= 2 and k >= 1, got p={p}, k={k}"
        )));
    }
    let mut batch = Batch {
        clips: Vec::with_capacity(p * k),
        subjects: Vec::with_capacity(p * k),
        labels: Vec::with_capacity(p * k),
        subject_ids: Vec::with_capacity(p),
    };
    for (slot, si) in index::sample(rng, pool.len(), p).into_iter().enumerate() {
        let (id, label, seqs) = &pool.subjects[si];
        let picks: Vec<usize> = if seqs.len() >= k {
            seqs.choose_multiple(rng, k).copied().collect()
        } else {
            (0..k).map(|_| seqs[rng.gen_range(0..seqs.len())]).collect()
        };
        for seq in picks {
            batch
                .clips
                .push(dataset.sequences[seq].sample_training_clip(clip_len, rng)?);
            batch.subjects.push(slot);
            batch.labels.push(*label);
        }
        batch.subject_ids.push(id.clone());
    }
    Ok(batch)
}
