use serde::{Deserialize, Serialize};

use crate::data::Grade;
use crate::error::{Error, Result};

pub const GRADING_BINS: usize = 10;

/// Bin of `p` among `[0,0.1), …, [0.8,0.9), [0.9,1.0]`.
pub fn probability_bin(p: f64) -> usize {
    ((p * GRADING_BINS as f64).floor().max(0.0) as usize).min(GRADING_BINS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortHistogram {
    pub size: u64,
    pub counts: [u64; GRADING_BINS],
    /// `counts / size`.
    pub fractions: [f64; GRADING_BINS],
}

pub fn cohort_histogram(probs: &[f64]) -> Result<CohortHistogram> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("empty cohort".into()));
    }
    let mut counts = [0u64; GRADING_BINS];
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        counts[probability_bin(p)] += 1;
    }
    let size = probs.len() as u64;
    Ok(CohortHistogram {
        size,
        counts,
        fractions: counts.map(|c| c as f64 / size as f64),
    })
}

/// Moderate and severe cohorts under one scale; a cohort with no members is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleHistogram {
    pub scale: String,
    pub moderate: Option<CohortHistogram>,
    pub severe: Option<CohortHistogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradingHistogram {
    pub bin_edges: Vec<f64>,
    pub scales: Vec<ScaleHistogram>,
}

fn scale_histogram(scale: &str, probs: &[f64], grades: &[Grade]) -> Result<ScaleHistogram> {
    let cohort = |want: Grade| -> Result<Option<CohortHistogram>> {
        let members: Vec<f64> = probs
            .iter()
            .zip(grades)
            .filter(|(_, g)| **g == want)
            .map(|(p, _)| *p)
            .collect();
        if members.is_empty() {
            Ok(None)
        } else {
            cohort_histogram(&members).map(Some)
        }
    };
    Ok(ScaleHistogram {
        scale: scale.to_string(),
        moderate: cohort(Grade::Moderate)?,
        severe: cohort(Grade::Severe)?,
    })
}

/// Probability histograms of risk-labelled samples, split by SDS grade and by PHQ-9 grade.
pub fn grading_histogram(probs: &[f64], sds: &[Grade], phq: &[Grade]) -> Result<GradingHistogram> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("no risk-labelled samples to grade".into()));
    }
    if sds.len() != probs.len() || phq.len() != probs.len() {
        return Err(Error::InvalidArgument(
            "one SDS and one PHQ-9 grade per probability".into(),
        ));
    }
    Ok(GradingHistogram {
        bin_edges: (0..=GRADING_BINS).map(|i| i as f64 / GRADING_BINS as f64).collect(),
        scales: vec![
            scale_histogram("sds", probs, sds)?,
            scale_histogram("phq9", probs, phq)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_are_right_open_except_the_last() {
        assert_eq!(probability_bin(0.0), 0);
        assert_eq!(probability_bin(0.0999), 0);
        assert_eq!(probability_bin(0.1), 1);
        assert_eq!(probability_bin(0.75), 7);
        assert_eq!(probability_bin(0.9), 9);
        assert_eq!(probability_bin(1.0), 9);
    }

    #[test]
    fn all_mass_in_one_bin() {
        let h = cohort_histogram(&[0.75; 8]).unwrap();
        assert_eq!(h.counts[7], 8);
        assert_eq!(h.fractions[7], 1.0);
        assert_eq!(h.counts.iter().sum::<u64>(), h.size);
        assert!(cohort_histogram(&[]).is_err());
    }

    #[test]
    fn cohorts_split_by_scale() {
        use Grade::*;
        let g = grading_histogram(
            &[0.2, 0.95, 0.6],
            &[Moderate, Severe, Severe],
            &[Moderate, Moderate, NotGraded],
        )
        .unwrap();
        let sds = &g.scales[0];
        assert_eq!(sds.moderate.as_ref().unwrap().size, 1);
        assert_eq!(sds.severe.as_ref().unwrap().counts[9], 1);
        let phq = &g.scales[1];
        assert_eq!(phq.moderate.as_ref().unwrap().size, 2);
        assert!(phq.severe.is_none());
        assert_eq!(g.bin_edges.len(), 11);
    }
}
