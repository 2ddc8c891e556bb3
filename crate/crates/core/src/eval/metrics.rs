use serde::{Deserialize, Serialize};

use crate::data::RiskLabel;
use crate::error::{Error, Result};

/// Decision threshold for the binary metrics; a probability equal to it counts as risk.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Risk is the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(probs: &[f64], labels: &[RiskLabel], threshold: f64) -> Result<ConfusionCounts> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("confusion of an empty evaluation".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities, {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, l) in probs.iter().zip(labels) {
        match (p >= threshold, l.is_risk()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall and F1, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
}

/// With no predicted positives precision is 100%; with no actual positives recall is 100%.
pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let total = tp + fp + tn + fn_;
    let acc = if total > 0.0 { (tp + tn) / total } else { 0.0 };
    let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 1.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 1.0 };
    let f1 = if prec + recall > 0.0 {
        2.0 * prec * recall / (prec + recall)
    } else {
        0.0
    };
    Metrics {
        acc: 100.0 * acc,
        prec: 100.0 * prec,
        recall: 100.0 * recall,
        f1: 100.0 * f1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub auc: f64,
    /// From (0,0) to (1,1), one point per distinct score threshold.
    pub points: Vec<RocPoint>,
}

fn split_scores(probs: &[f64], labels: &[RiskLabel]) -> Result<(usize, usize)> {
    if probs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores, {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::NonFinite("ROC scores".into()));
    }
    let pos = labels.iter().filter(|l| l.is_risk()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("ROC needs both risk and control samples".into()));
    }
    Ok((pos, neg))
}

/// ROC swept over every distinct score (descending), area by the trapezoidal rule.
pub fn compute_auc(probs: &[f64], labels: &[RiskLabel]) -> Result<Roc> {
    let (pos, neg) = split_scores(probs, labels)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && probs[order[i]] == score {
            if labels[order[i]].is_risk() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Exact in integer counts: trapezoid between consecutive points.
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(Roc {
        auc: auc / (pos as f64 * neg as f64),
        points,
    })
}

/// Mann–Whitney form: the fraction of (risk, control) pairs ranked correctly, ties counted half.
pub fn auc_pairwise(probs: &[f64], labels: &[RiskLabel]) -> Result<f64> {
    let (pos, neg) = split_scores(probs, labels)?;
    let side = |risk: bool| {
        probs
            .iter()
            .zip(labels)
            .filter(move |(_, l)| l.is_risk() == risk)
            .map(|(p, _)| *p)
    };
    let mut score = 0.0;
    for p in side(true) {
        for q in side(false) {
            if p > q {
                score += 1.0;
            } else if p == q {
                score += 0.5;
            }
        }
    }
    Ok(score / (pos as f64 * neg as f64))
}
