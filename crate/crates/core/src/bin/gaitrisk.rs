use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use gaitrisk::config::ExperimentConfig;
use gaitrisk::data::{Dataset, SequenceHeader, SilhouetteSequence, Split, SEQUENCE_HEADER_LEN};
use gaitrisk::eval::{
    ablation_runner, all_view_rows, grading_from_predictions, per_view_experiment, predict_split,
    report_from_predictions, write_ablation_tables, write_json, write_metrics_csv, write_predictions_csv,
    write_view_table,
};
use gaitrisk::model::Model;
use gaitrisk::synth::generate_dataset;
use gaitrisk::train::{load_checkpoint, run_training, Trainer, FINAL_CHECKPOINT_FILE};
use gaitrisk::{Error, Result};

#[derive(Parser)]
#[command(name = "gaitrisk", version, about = "Gait-silhouette depression-risk recognition")]
struct Cli {
    /// Experiment file (TOML). Without it the canonical configuration is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory of the command; overrides the matching `paths` entry.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (1 gives the reference single-threaded schedule).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic corpus and its index.
    GenData,
    /// Train on the corpus at `paths.data_dir`.
    Train {
        /// Overrides `training.steps` (the decay step scales with it if needed).
        #[arg(long)]
        steps: Option<u64>,
        /// Resume from this checkpoint.
        #[arg(long)]
        from_checkpoint: Option<PathBuf>,
    },
    /// Score the test split and write metric, ROC and grading reports.
    Eval {
        /// Defaults to the final checkpoint under `paths.run_dir`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluate one view only.
        #[arg(long)]
        view: Option<u8>,
    },
    /// Temporal-kernel × triplet grid, or the per-view experiment.
    Ablate {
        #[arg(long, value_enum, default_value_t = Grid::TauTriplet)]
        grid: Grid,
    },
    /// Print a sequence file's header and an ASCII preview of one frame.
    Inspect {
        file: PathBuf,
        /// Frame to preview; defaults to the middle one.
        #[arg(long)]
        frame: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    TauTriplet,
    Views,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::canonical(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    if let Command::Inspect { file, frame } = &cli.command {
        return inspect(file, *frame);
    }
    let mut cfg = load_config(&cli)?;
    if let Command::Train { steps: Some(steps), .. } = &cli.command {
        override_steps(&mut cfg, *steps);
    }
    cfg.validate()?;
    let started = Instant::now();
    let out = match &cli.command {
        Command::GenData => gen_data(&cfg, cli.out.as_deref())?,
        Command::Train { from_checkpoint, .. } => train(&cfg, cli.out.as_deref(), from_checkpoint.as_deref())?,
        Command::Eval { checkpoint, view } => eval(&cfg, cli.out.as_deref(), checkpoint.as_deref(), *view)?,
        Command::Ablate { grid } => ablate(&cfg, cli.out.as_deref(), *grid)?,
        Command::Inspect { .. } => unreachable!(),
    };
    // Wall-clock facts live here so every other output stays byte-reproducible.
    let run_log = out.join("run.log");
    let line = format!(
        "{:?} elapsed_s={:.1}\n",
        std::env::args().collect::<Vec<_>>(),
        started.elapsed().as_secs_f64()
    );
    fs::write(&run_log, line).map_err(|e| Error::io(&run_log, e))
}

/// A shorter run keeps the decay at the same fraction of the schedule.
fn override_steps(cfg: &mut ExperimentConfig, steps: u64) {
    let t = &mut cfg.training;
    if steps > 0 && t.decay_step >= steps && t.steps > 0 {
        t.decay_step = ((t.decay_step as u128 * steps as u128) / t.steps as u128) as u64;
        t.decay_step = t.decay_step.min(steps - 1);
    }
    t.steps = steps;
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let dir = &cfg.paths.data_dir;
    if !dir.join(gaitrisk::data::INDEX_FILE_NAME).exists() {
        return Err(Error::Data(format!(
            "no dataset at {dir:?}; run `gaitrisk gen-data` first"
        )));
    }
    info!("loading dataset from {}", dir.display());
    Dataset::load(dir)
}

fn gen_data(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.unwrap_or(&cfg.paths.data_dir).to_path_buf();
    create_dir(&dir)?;
    info!("rendering {} subjects into {}", cfg.generator.n_subjects, dir.display());
    let ds = generate_dataset(&cfg.generator_config(), &dir)?;
    let idx = &ds.index;
    let risk = idx
        .subjects
        .iter()
        .filter(|s| s.label().is_some_and(|l| l.is_risk()))
        .count();
    let control = idx
        .subjects
        .iter()
        .filter(|s| s.label().is_some_and(|l| !l.is_risk()))
        .count();
    println!(
        "subjects={} sequences={} risk={} control={} excluded={} train_subjects={} test_subjects={}",
        idx.subjects.len(),
        idx.sequences.len(),
        risk,
        control,
        idx.subjects.len() - risk - control,
        idx.subjects_in(Split::Train).len(),
        idx.subjects_in(Split::Test).len(),
    );
    Ok(dir)
}

fn train(cfg: &ExperimentConfig, out: Option<&Path>, from: Option<&Path>) -> Result<PathBuf> {
    let dir = out.unwrap_or(&cfg.paths.run_dir).to_path_buf();
    let ds = load_dataset(cfg)?;
    let mut trainer = match from {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            ckpt.check_model(&cfg.model)?;
            info!("resuming from {} at step {}", p.display(), ckpt.manifest.step);
            Trainer::resume(ckpt, cfg.train_config(), &ds, None)?
        }
        None => Trainer::new(cfg.model.clone(), cfg.train_config(), &ds, None)?,
    };
    let total = trainer.config.steps;
    let every = (total / 20).max(1);
    let outcome = run_training(&mut trainer, &dir, |row| {
        if row.step % every == 0 || row.step == total {
            info!(
                "step {}/{} lr={:.1e} ce={:.4} tri={:.4} total={:.4}",
                row.step, total, row.lr, row.ce, row.tri, row.total
            );
        }
    })?;
    match outcome.log.last() {
        Some(last) => println!(
            "trained steps={} final_ce={:.6} final_tri={:.6} final_total={:.6} checkpoint={}",
            last.step,
            last.ce,
            last.tri,
            last.total,
            outcome.final_checkpoint.display()
        ),
        None => println!("trained steps=0 checkpoint={}", outcome.final_checkpoint.display()),
    }
    Ok(dir)
}

fn eval(cfg: &ExperimentConfig, out: Option<&Path>, checkpoint: Option<&Path>, view: Option<u8>) -> Result<PathBuf> {
    if let Some(v) = view {
        if !(1..=6).contains(&v) {
            return Err(Error::config("--view", format!("view {v} outside 1..=6")));
        }
    }
    let dir = out.unwrap_or(&cfg.paths.eval_dir).to_path_buf();
    let ckpt_path = checkpoint.map_or_else(|| cfg.paths.run_dir.join(FINAL_CHECKPOINT_FILE), Path::to_path_buf);
    let ckpt = load_checkpoint(&ckpt_path)?;
    ckpt.check_model(&cfg.model)?;
    let model = Model::new(cfg.model.clone(), ckpt.params)?;
    let ds = load_dataset(cfg)?;
    create_dir(&dir)?;
    info!(
        "scoring test split{}",
        view.map_or(String::new(), |v| format!(" (view {v})"))
    );
    let preds = predict_split(&model, &ds, Split::Test, view)?;
    let mut report = report_from_predictions(&preds, cfg.evaluation.threshold)?;
    if view.is_none() {
        report.per_view.retain(|v, _| cfg.evaluation.views.contains(v));
    }
    write_metrics_csv(&dir.join("metrics.csv"), &report)?;
    write_json(&dir.join("report.json"), &report)?;
    write_json(&dir.join("roc.json"), &report.roc)?;
    write_predictions_csv(&dir.join("predictions.csv"), &preds)?;
    match grading_from_predictions(&ds, &preds) {
        Ok(h) => write_json(&dir.join("grading.json"), &h)?,
        Err(e) => log::warn!("grading histogram skipped: {e}"),
    }
    let s = &report.overall;
    println!(
        "n={} acc={:.2} prec={:.2} recall={:.2} f1={:.2} auc={}",
        s.n,
        s.metrics.acc,
        s.metrics.prec,
        s.metrics.recall,
        s.metrics.f1,
        s.auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"))
    );
    Ok(dir)
}

fn ablate(cfg: &ExperimentConfig, out: Option<&Path>, grid: Grid) -> Result<PathBuf> {
    let dir = out.unwrap_or(&cfg.paths.ablation_dir).to_path_buf();
    let ds = load_dataset(cfg)?;
    create_dir(&dir)?;
    let spec = cfg.run_spec();
    match grid {
        Grid::TauTriplet => {
            let ev = &cfg.evaluation;
            info!("ablation grid: taus {:?} × triplet {:?}", ev.taus, ev.triplet);
            let cells = ablation_runner(&spec, &ds, &ev.taus, &ev.triplet, &dir)?;
            let base_tau = cfg.model.blocks[0].temporal_kernel;
            for p in write_ablation_tables(&dir, &cells, base_tau)? {
                println!("wrote {}", p.display());
            }
        }
        Grid::Views => {
            let rows = per_view_experiment(&spec, &ds, &all_view_rows(), &dir)?;
            let path = dir.join("per_view.csv");
            write_view_table(&path, &rows)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(dir)
}

fn inspect(file: &Path, frame: Option<usize>) -> Result<()> {
    let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
    let header = SequenceHeader::parse(&bytes, file)?;
    let seq = SilhouetteSequence::decode(&bytes, file)?;
    println!("file: {}", file.display());
    println!(
        "version={} frames={} height={} width={} meta_len={} payload_offset={}",
        header.version,
        header.frames,
        header.height,
        header.width,
        header.meta_len,
        SEQUENCE_HEADER_LEN + header.meta_len as usize
    );
    println!(
        "subject={} view={} attire={:?} direction={:?}",
        seq.meta.subject_id, seq.meta.view_id, seq.meta.attire, seq.meta.direction
    );
    let i = frame.unwrap_or(seq.len() / 2);
    if i >= seq.len() {
        return Err(Error::InvalidArgument(format!("frame {i} outside 0..{}", seq.len())));
    }
    println!("frame {i} ({} foreground pixels):", seq.foreground_count(i));
    for row in seq.frame(i).chunks(seq.width()) {
        println!(
            "{}",
            row.iter().map(|&p| if p != 0 { '#' } else { '.' }).collect::<String>()
        );
    }
    Ok(())
}
