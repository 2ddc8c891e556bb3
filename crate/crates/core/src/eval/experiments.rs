use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{predict_split, report_from_predictions, MetricsReport, Prediction};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::train::{run_training, StepLog, TrainConfig, Trainer};

/// Model and recipe for one train-then-evaluate run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub report: MetricsReport,
    pub predictions: Vec<Prediction>,
    pub log: Vec<StepLog>,
    pub checkpoint: PathBuf,
}

/// Trains on the train split and evaluates on the test split, both restricted to `view` if given.
pub fn train_and_evaluate(spec: &RunSpec, dataset: &Dataset, view: Option<u8>, out_dir: &Path) -> Result<RunResult> {
    let mut trainer = Trainer::new(spec.model.clone(), spec.training.clone(), dataset, view)?;
    let outcome = run_training(&mut trainer, out_dir, |_| {})?;
    let model = Model::new(trainer.model.clone(), trainer.params.clone())?;
    let predictions = predict_split(&model, dataset, Split::Test, view)?;
    let report = report_from_predictions(&predictions, spec.threshold)?;
    Ok(RunResult {
        report,
        predictions,
        log: outcome.log,
        checkpoint: outcome.final_checkpoint,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRow {
    /// `None` is the all-view run.
    pub view: Option<u8>,
    pub n_test: usize,
    pub acc: f64,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// One model per single view plus one on every view, each scored on its own view subset.
pub fn per_view_experiment(
    spec: &RunSpec,
    dataset: &Dataset,
    views: &[Option<u8>],
    out_dir: &Path,
) -> Result<Vec<ViewRow>> {
    let mut rows = Vec::with_capacity(views.len());
    for &view in views {
        let dir = out_dir.join(view.map_or_else(|| "view-all".to_string(), |v| format!("view-{v}")));
        let r = train_and_evaluate(spec, dataset, view, &dir)?;
        let s = &r.report.overall;
        rows.push(ViewRow {
            view,
            n_test: s.n,
            acc: s.metrics.acc,
            prec: s.metrics.prec,
            recall: s.metrics.recall,
            f1: s.metrics.f1,
            auc: s.auc,
        });
    }
    Ok(rows)
}

/// The six single views followed by the all-view run.
pub fn all_view_rows() -> Vec<Option<u8>> {
    (1..=6).map(Some).chain([None]).collect()
}

pub fn write_view_table(path: &Path, rows: &[ViewRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["view", "n_test", "acc", "prec", "recall", "f1", "auc"])?;
    for r in rows {
        w.write_record([
            r.view.map_or_else(|| "all".to_string(), |v| v.to_string()),
            r.n_test.to_string(),
            format!("{:.4}", r.acc),
            format!("{:.4}", r.prec),
            format!("{:.4}", r.recall),
            format!("{:.4}", r.f1),
            r.auc.map_or_else(String::new, |a| format!("{a:.6}")),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub temporal_kernel: usize,
    pub triplet: bool,
    pub seed: u64,
    pub acc: f64,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub final_total_loss: f64,
    #[serde(skip)]
    pub log: Vec<StepLog>,
}

/// Every (temporal kernel, triplet on/off) cell trained from the same seed.
pub fn ablation_runner(
    spec: &RunSpec,
    dataset: &Dataset,
    taus: &[usize],
    triplet: &[bool],
    out_dir: &Path,
) -> Result<Vec<AblationCell>> {
    if taus.is_empty() || triplet.is_empty() {
        return Err(Error::InvalidArgument("ablation grid is empty".into()));
    }
    let mut cells = Vec::with_capacity(taus.len() * triplet.len());
    for &tau in taus {
        for &tri in triplet {
            let mut cell = spec.clone();
            cell.model.set_temporal_kernel(tau);
            cell.training.use_triplet = tri;
            let dir = out_dir.join(format!("tau{tau}-triplet-{}", if tri { "on" } else { "off" }));
            let r = train_and_evaluate(&cell, dataset, None, &dir)?;
            let s = &r.report.overall;
            cells.push(AblationCell {
                temporal_kernel: tau,
                triplet: tri,
                seed: cell.training.seed,
                acc: s.metrics.acc,
                prec: s.metrics.prec,
                recall: s.metrics.recall,
                f1: s.metrics.f1,
                auc: s.auc,
                final_total_loss: r.log.last().map_or(f64::NAN, |l| l.total),
                log: r.log,
            });
        }
    }
    Ok(cells)
}

pub const ABLATION_GRID_FILE: &str = "ablation_grid.csv";
pub const TEMPORAL_KERNEL_TABLE_FILE: &str = "ablation_temporal_kernel.csv";
pub const TRIPLET_TABLE_FILE: &str = "ablation_triplet.csv";

fn metric_fields(c: &AblationCell) -> [String; 5] {
    [
        format!("{:.4}", c.acc),
        format!("{:.4}", c.prec),
        format!("{:.4}", c.recall),
        format!("{:.4}", c.f1),
        c.auc.map_or_else(String::new, |a| format!("{a:.6}")),
    ]
}

/// Full grid, the temporal-kernel table (triplet on) and the triplet table (at `base_tau`).
pub fn write_ablation_tables(dir: &Path, cells: &[AblationCell], base_tau: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = dir.join(ABLATION_GRID_FILE);
    let mut w = csv::Writer::from_path(&grid)?;
    w.write_record([
        "temporal_kernel",
        "triplet",
        "seed",
        "acc",
        "prec",
        "recall",
        "f1",
        "auc",
        "final_total_loss",
    ])?;
    for c in cells {
        let mut row = vec![
            c.temporal_kernel.to_string(),
            on_off(c.triplet).into(),
            c.seed.to_string(),
        ];
        row.extend(metric_fields(c));
        row.push(format!("{:.6}", c.final_total_loss));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(&grid, e))?;

    let tau_table = dir.join(TEMPORAL_KERNEL_TABLE_FILE);
    let mut w = csv::Writer::from_path(&tau_table)?;
    w.write_record(["temporal_kernel", "acc", "prec", "recall", "f1", "auc"])?;
    for c in cells.iter().filter(|c| c.triplet) {
        let mut row = vec![c.temporal_kernel.to_string()];
        row.extend(metric_fields(c));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(&tau_table, e))?;

    let tri_table = dir.join(TRIPLET_TABLE_FILE);
    let mut w = csv::Writer::from_path(&tri_table)?;
    w.write_record(["triplet", "acc", "prec", "recall", "f1", "auc"])?;
    for c in cells.iter().filter(|c| c.temporal_kernel == base_tau) {
        let mut row = vec![on_off(c.triplet).to_string()];
        row.extend(metric_fields(c));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(&tri_table, e))?;
    Ok(vec![grid, tau_table, tri_table])
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Means of consecutive `width`-step windows of the total loss (a partial tail is dropped).
pub fn window_means(log: &[StepLog], width: usize) -> Vec<f64> {
    log.chunks_exact(width.max(1))
        .map(|w| w.iter().map(|r| r.total).sum::<f64>() / w.len() as f64)
        .collect()
}
