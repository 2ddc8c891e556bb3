//! Property bodies shared by the focused tests and the acceptance run.

use gaitrisk::data::RiskLabel;
use gaitrisk::data::{Attire, Direction, SequenceMeta, SilhouetteSequence};
use gaitrisk::eval::{auc_pairwise, compute_auc, window_starts};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn meta_strategy() -> impl Strategy<Value = SequenceMeta> {
    (
        "[A-Za-z0-9_]{1,12}",
        1u8..=6,
        prop_oneof![Just(Attire::NoCoat), Just(Attire::Coat), Just(Attire::Backpack)],
        prop_oneof![Just(Direction::Toward), Just(Direction::Away)],
    )
        .prop_map(|(subject_id, view_id, attire, direction)| SequenceMeta {
            subject_id,
            view_id,
            attire,
            direction,
        })
}

/// Small random binary sequences.
pub fn sequence_strategy() -> impl Strategy<Value = SilhouetteSequence> {
    (1usize..12, 1usize..6, 1usize..6, meta_strategy()).prop_flat_map(|(t, h, w, meta)| {
        proptest::collection::vec(0u8..=1, t * h * w)
            .prop_map(move |px| SilhouetteSequence::new(px, t, h, w, meta.clone()).unwrap())
    })
}

pub fn pad_law(seq: &SilhouetteSequence, extra: usize) -> Result<(), TestCaseError> {
    let target = seq.len() + extra;
    let padded = seq
        .pad_by_repetition(target)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(padded.len(), target);
    prop_assert_eq!(&padded.meta, &seq.meta);
    for i in 0..target {
        prop_assert_eq!(padded.frame(i), seq.frame(i % seq.len()));
        prop_assert_eq!(padded.frame(i), padded.frame(i % seq.len()));
    }
    // idempotent at the target length
    prop_assert_eq!(&padded.pad_by_repetition(target).unwrap(), &padded);
    prop_assert_eq!(&seq.pad_by_repetition(seq.len()).unwrap(), seq);
    Ok(())
}

pub fn round_trip_law(seq: &SilhouetteSequence) -> Result<(), TestCaseError> {
    let bytes = seq.encode().map_err(|e| TestCaseError::fail(e.to_string()))?;
    let back = SilhouetteSequence::decode(&bytes, std::path::Path::new("mem"))
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back, seq);
    prop_assert_eq!(back.encode().unwrap(), bytes);
    Ok(())
}

pub fn window_coverage_law(frames: usize, clip_len: usize) -> Result<(), TestCaseError> {
    let starts = window_starts(frames, clip_len);
    prop_assert!(!starts.is_empty());
    prop_assert_eq!(starts[0], 0);
    prop_assert!(starts.windows(2).all(|w| w[0] < w[1]));
    if frames <= clip_len {
        prop_assert_eq!(starts, vec![0]);
        return Ok(());
    }
    prop_assert_eq!(*starts.last().unwrap(), frames - clip_len);
    let mut covered = vec![false; frames];
    for &s in &starts {
        prop_assert!(s + clip_len <= frames);
        covered[s..s + clip_len].iter_mut().for_each(|c| *c = true);
    }
    prop_assert!(covered.iter().all(|&c| c));
    // consecutive windows overlap by at least half a clip
    prop_assert!(starts.windows(2).all(|w| w[1] - w[0] <= (clip_len / 2).max(1)));
    Ok(())
}

/// Scores on a coarse grid so ties are common, with both classes present.
pub fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<RiskLabel>)> {
    proptest::collection::vec((0u32..20, any::<bool>()), 2..60)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| {
            v.into_iter()
                .map(|(s, r)| (s as f64 / 19.0, if r { RiskLabel::Risk } else { RiskLabel::Control }))
                .unzip()
        })
}

pub fn auc_law(scores: &[f64], labels: &[RiskLabel]) -> Result<(), TestCaseError> {
    let roc = compute_auc(scores, labels).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let oracle = auc_pairwise(scores, labels).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(
        (roc.auc - oracle).abs() <= 1e-9,
        "auc {} vs pairwise {}",
        roc.auc,
        oracle
    );
    prop_assert!((0.0..=1.0).contains(&roc.auc));
    let first = roc.points.first().unwrap();
    let last = roc.points.last().unwrap();
    prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
    prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    prop_assert!(roc
        .points
        .windows(2)
        .all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
    Ok(())
}
