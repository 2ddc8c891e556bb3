use rayon::prelude::*;

use crate::data::{Dataset, SilhouetteSequence};
use crate::error::{Error, Result};
use crate::model::Model;

/// Window starts covering `frames` with windows of `clip_len` at stride
/// `clip_len / 2`; the last window is right-aligned. Shorter sequences get one
/// (padded) window at 0.
pub fn window_starts(frames: usize, clip_len: usize) -> Vec<usize> {
    if frames <= clip_len {
        return vec![0];
    }
    let stride = (clip_len / 2).max(1);
    let last = frames - clip_len;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if *starts.last().unwrap() != last {
        starts.push(last);
    }
    starts
}

/// Risk probability of a whole sequence: the mean over covering windows.
pub fn infer_sequence_probability(model: &Model<f32>, seq: &SilhouetteSequence) -> Result<f64> {
    let cfg = &model.config;
    if seq.height() != cfg.height || seq.width() != cfg.width {
        return Err(Error::shape(
            "infer_sequence_probability",
            format!(
                "{}×{} frames, model expects {}×{}",
                seq.height(),
                seq.width(),
                cfg.height,
                cfg.width
            ),
        ));
    }
    if seq.is_empty() {
        return Err(Error::InvalidArgument("sequence has no frames".into()));
    }
    if seq.len() < cfg.clip_len {
        return model.clip_probability(&seq.pad_by_repetition(cfg.clip_len)?);
    }
    let starts = window_starts(seq.len(), cfg.clip_len);
    let mut sum = 0.0;
    for &s in &starts {
        sum += model.clip_probability(&seq.window(s, cfg.clip_len)?)?;
    }
    Ok(sum / starts.len() as f64)
}

/// Probabilities for the given dataset sequences, in input order.
pub fn predict_sequences(model: &Model<f32>, dataset: &Dataset, ids: &[usize]) -> Result<Vec<f64>> {
    ids.par_iter()
        .map(|&i| infer_sequence_probability(model, &dataset.sequences[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_layouts() {
        assert_eq!(window_starts(60, 60), vec![0]);
        assert_eq!(window_starts(45, 60), vec![0]);
        assert_eq!(window_starts(150, 60), vec![0, 30, 60, 90]);
        assert_eq!(window_starts(100, 60), vec![0, 30, 40]);
        assert_eq!(window_starts(61, 60), vec![0, 1]);
    }
}
