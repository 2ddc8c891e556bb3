use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grading::{grading_histogram, GradingHistogram};
use super::infer::predict_sequences;
use super::metrics::{compute_auc, compute_metrics, confusion, ConfusionCounts, Metrics, RocPoint};
use crate::data::{Dataset, Grade, RiskLabel, Split};
use crate::error::{Error, Result};
use crate::model::Model;

/// One scored test sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sequence: usize,
    pub subject_id: String,
    pub view_id: u8,
    pub label: RiskLabel,
    pub probability: f64,
}

/// Binary metrics plus AUC for one subset. AUC is absent when the subset holds one class only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub overall: Summary,
    pub roc: Vec<RocPoint>,
    pub per_view: BTreeMap<u8, Summary>,
}

fn summarize(preds: &[&Prediction], threshold: f64) -> Result<(Summary, Vec<RocPoint>)> {
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<RiskLabel> = preds.iter().map(|p| p.label).collect();
    let c = confusion(&probs, &labels, threshold)?;
    let roc = if labels.iter().any(|l| l.is_risk()) && labels.iter().any(|l| !l.is_risk()) {
        Some(compute_auc(&probs, &labels)?)
    } else {
        None
    };
    Ok((
        Summary {
            n: preds.len(),
            confusion: c,
            metrics: compute_metrics(&c),
            auc: roc.as_ref().map(|r| r.auc),
        },
        roc.map(|r| r.points).unwrap_or_default(),
    ))
}

pub fn report_from_predictions(preds: &[Prediction], threshold: f64) -> Result<MetricsReport> {
    let all: Vec<&Prediction> = preds.iter().collect();
    let (overall, roc) = summarize(&all, threshold)?;
    let mut views: BTreeMap<u8, Vec<&Prediction>> = BTreeMap::new();
    for p in preds {
        views.entry(p.view_id).or_default().push(p);
    }
    let per_view = views
        .into_iter()
        .map(|(v, ps)| summarize(&ps, threshold).map(|(s, _)| (v, s)))
        .collect::<Result<_>>()?;
    Ok(MetricsReport {
        threshold,
        overall,
        roc,
        per_view,
    })
}

/// Scores every labelled sequence of `split` (optionally one view only).
pub fn predict_split(model: &Model<f32>, dataset: &Dataset, split: Split, view: Option<u8>) -> Result<Vec<Prediction>> {
    let ids: Vec<usize> = dataset
        .sequence_ids(split, view)
        .into_iter()
        .filter(|&i| dataset.label_of(i).is_some())
        .collect();
    if ids.is_empty() {
        return Err(Error::Data(format!(
            "no labelled {split:?} sequences{}",
            view.map_or(String::new(), |v| format!(" for view {v}"))
        )));
    }
    let probs = predict_sequences(model, dataset, &ids)?;
    Ok(ids
        .iter()
        .zip(probs)
        .map(|(&i, p)| {
            let meta = &dataset.sequences[i].meta;
            Prediction {
                sequence: i,
                subject_id: meta.subject_id.clone(),
                view_id: meta.view_id,
                label: dataset.label_of(i).expect("filtered"),
                probability: p,
            }
        })
        .collect())
}

/// Grading histogram over the risk-labelled predictions.
pub fn grading_from_predictions(dataset: &Dataset, preds: &[Prediction]) -> Result<GradingHistogram> {
    let mut probs = Vec::new();
    let mut sds: Vec<Grade> = Vec::new();
    let mut phq: Vec<Grade> = Vec::new();
    for p in preds.iter().filter(|p| p.label.is_risk()) {
        let rec = dataset
            .index
            .subject(&p.subject_id)
            .ok_or_else(|| Error::Data(format!("unknown subject {}", p.subject_id)))?;
        probs.push(p.probability);
        sds.push(rec.sds_grade);
        phq.push(rec.phq_grade);
    }
    grading_histogram(&probs, &sds, &phq)
}

pub const METRICS_HEADER: [&str; 7] = ["subset", "n", "acc", "prec", "recall", "f1", "auc"];

fn metric_row(name: &str, s: &Summary) -> Vec<String> {
    let m = &s.metrics;
    vec![
        name.to_string(),
        s.n.to_string(),
        format!("{:.4}", m.acc),
        format!("{:.4}", m.prec),
        format!("{:.4}", m.recall),
        format!("{:.4}", m.f1),
        s.auc.map_or_else(String::new, |a| format!("{a:.6}")),
    ]
}

/// Overall row followed by one row per view.
pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    w.write_record(metric_row("all", &report.overall))?;
    for (v, s) in &report.per_view {
        w.write_record(metric_row(&format!("view{v}"), s))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_predictions_csv(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in preds {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
