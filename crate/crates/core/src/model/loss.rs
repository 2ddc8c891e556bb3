//! Classification and metric-learning objectives.

use crate::data::RiskLabel;
use crate::error::Result;
use crate::numerics::{for_each_triplet, log_softmax, Graph, Real, Var};

/// Mean cross-entropy of `N×2` (or `2`) logits against labels.
pub fn ce_loss<T: Real>(g: &mut Graph<T>, logits: Var, labels: &[RiskLabel]) -> Result<Var> {
    let targets: Vec<usize> = labels.iter().map(|l| l.class_index()).collect();
    g.cross_entropy(logits, &targets)
}

/// Batch-all triplet loss over `N×D` embeddings grouped by subject index.
pub fn triplet_loss_batch<T: Real>(g: &mut Graph<T>, embeddings: Var, subjects: &[usize], margin: f64) -> Result<Var> {
    g.triplet_batch_all(embeddings, subjects, margin)
}

/// Unweighted sum of the two objectives.
pub fn total_loss<T: Real>(g: &mut Graph<T>, ce: Var, tri: Var) -> Result<Var> {
    g.add(ce, tri)
}

/// Hinge term of one (anchor, positive, negative) triple.
pub fn triplet_term(d_anchor_positive: f64, d_anchor_negative: f64, margin: f64) -> f64 {
    (d_anchor_positive - d_anchor_negative + margin).max(0.0)
}

/// Cross-entropy of a single logit pair, evaluated directly.
pub fn ce_value(logits: [f64; 2], label: RiskLabel) -> f64 {
    -log_softmax(&logits)[label.class_index()]
}

/// Exhaustive batch-all reference: mean over strictly positive hinge terms.
pub fn triplet_reference(embeddings: &[Vec<f64>], subjects: &[usize], margin: f64) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (mut sum, mut count) = (0.0, 0usize);
    for_each_triplet(subjects, |a, p, n| {
        let l = triplet_term(
            dist(&embeddings[a], &embeddings[p]),
            dist(&embeddings[a], &embeddings[n]),
            margin,
        );
        if l > 0.0 {
            sum += l;
            count += 1;
        }
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
