use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaitrisk::train::read_loss_log;

const TINY: &str = r#"
seed = 5

[generator]
n_subjects = 6
min_frames = 40
max_frames = 70

[model]
clip_len = 60

[[model.blocks]]
in_channels = 1
out_channels = 2
parts = 16
spatial_kernel = 3
temporal_kernel = 5
tcl_groups = 20
scl_enabled = true

[[model.blocks]]
in_channels = 2
out_channels = 2
parts = 16
spatial_kernel = 3
temporal_kernel = 5
scl_enabled = true

[[model.blocks]]
in_channels = 2
out_channels = 4
parts = 16
spatial_kernel = 3
temporal_kernel = 5
tcl_groups = 1
scl_enabled = false

[training]
steps = 4
decay_step = 3
lr = 1e-3
subjects_per_batch = 2
sequences_per_subject = 2
checkpoint_every = 2
allow_reduced_batch = true
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let paths = format!(
            "\n[paths]\ndata_dir = {:?}\nrun_dir = {:?}\neval_dir = {:?}\nablation_dir = {:?}\n",
            dir.path().join("data"),
            dir.path().join("train"),
            dir.path().join("eval"),
            dir.path().join("ablation"),
        );
        fs::write(dir.path().join("config.toml"), format!("{config}{paths}")).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.path("config.toml");
        Command::new(env!("CARGO_BIN_EXE_gaitrisk"))
            .arg("--config")
            .arg(&cfg)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "run.log" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

#[test]
fn usage_and_validation_errors_exit_with_one() {
    let ws = Workspace::new(TINY);
    let help = Command::new(env!("CARGO_BIN_EXE_gaitrisk"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(code(&help), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("gen-data"));
    assert_eq!(code(&ws.run(&["no-such-command"])), Some(1));

    for (from, to, field) in [
        (
            "parts = 16\nspatial_kernel = 3\ntemporal_kernel = 5\ntcl_groups = 20",
            "parts = 7\nspatial_kernel = 3\ntemporal_kernel = 5\ntcl_groups = 20",
            "parts",
        ),
        ("tcl_groups = 20", "tcl_groups = 7", "tcl_groups"),
        (
            "allow_reduced_batch = true",
            "allow_reduced_batch = false",
            "subjects_per_batch",
        ),
        ("steps = 4", "stepz = 4", "stepz"),
    ] {
        let bad = Workspace::new(&TINY.replacen(from, to, 1));
        let out = bad.run(&["gen-data"]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(code(&out), Some(1), "{field}: {err}");
        assert!(err.contains(field), "{field}: {err}");
        assert!(
            !bad.path("data").exists(),
            "{field}: validation must run before any work"
        );
    }
    assert_eq!(code(&ws.run(&["eval", "--view", "9"])), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let ws = Workspace::new(TINY);
    let out = ws.run(&["train"]);
    assert_eq!(code(&out), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-data"));
    let missing = ws.path("nothing.gseq");
    let out = ws.run(&["inspect", missing.to_str().unwrap()]);
    assert_eq!(code(&out), Some(2));
}

#[test]
fn generation_is_reproducible_and_summarised() {
    let ws = Workspace::new(TINY);
    let summary = ws.ok(&["gen-data"]);
    assert!(summary.contains("subjects=6 sequences=216"), "{summary}");
    let other = ws.path("again");
    ws.ok(&["gen-data", "--out", other.to_str().unwrap()]);
    assert_eq!(tree(&ws.path("data")), tree(&other));

    let reseeded = ws.path("reseeded");
    ws.ok(&["gen-data", "--seed", "6", "--out", reseeded.to_str().unwrap()]);
    assert_ne!(tree(&ws.path("data")), tree(&reseeded));
}

#[test]
fn train_eval_and_inspect_pipeline() {
    let ws = Workspace::new(TINY);
    ws.ok(&["gen-data"]);
    let line = ws.ok(&["train"]);
    assert!(line.starts_with("trained steps=4"), "{line}");
    let log = read_loss_log(&ws.path("train/loss_log.csv")).unwrap();
    assert_eq!(log.len(), 4);

    // --steps overrides the file; resuming finishes the same schedule
    let resumed = ws.path("resumed");
    ws.ok(&[
        "train",
        "--out",
        resumed.to_str().unwrap(),
        "--from-checkpoint",
        ws.path("train/step-00000002.gckp").to_str().unwrap(),
    ]);
    assert_eq!(read_loss_log(&resumed.join("loss_log.csv")).unwrap(), log[2..].to_vec());
    assert_eq!(
        fs::read(resumed.join("final.gckp")).unwrap(),
        fs::read(ws.path("train/final.gckp")).unwrap()
    );
    let short = ws.path("short");
    ws.ok(&["train", "--steps", "2", "--out", short.to_str().unwrap()]);
    assert_eq!(read_loss_log(&short.join("loss_log.csv")).unwrap().len(), 2);

    let summary = ws.ok(&["eval"]);
    for key in ["acc=", "prec=", "recall=", "f1=", "auc="] {
        assert!(summary.contains(key), "{summary}");
    }
    let metrics = fs::read_to_string(ws.path("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("subset,n,acc,prec,recall,f1,auc"), "{metrics}");
    for f in ["report.json", "roc.json", "predictions.csv", "run.log"] {
        assert!(ws.path("eval").join(f).exists(), "{f}");
    }
    let second = ws.path("eval2");
    ws.ok(&["eval", "--out", second.to_str().unwrap()]);
    assert_eq!(tree(&ws.path("eval")), tree(&second));

    let v4 = ws.path("eval-v4");
    ws.ok(&["eval", "--view", "4", "--out", v4.to_str().unwrap()]);
    let mut rdr = csv::Reader::from_path(v4.join("predictions.csv")).unwrap();
    let view_col = rdr.headers().unwrap().iter().position(|h| h == "view_id").unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| &r[view_col] == "4"));

    let seq = fs::read_dir(ws.path("data/sequences/S0000"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let shown = ws.ok(&["inspect", seq.to_str().unwrap(), "--frame", "0"]);
    assert!(
        shown.contains("frames=") && shown.contains("height=64 width=44"),
        "{shown}"
    );
    assert_eq!(
        shown
            .lines()
            .filter(|l| l.len() == 44 && l.chars().all(|c| c == '#' || c == '.'))
            .count(),
        64
    );
}

#[test]
fn ablation_grid_writes_six_cells() {
    let ws = Workspace::new(
        &TINY
            .replace("steps = 4", "steps = 2")
            .replace("decay_step = 3", "decay_step = 1"),
    );
    ws.ok(&["gen-data"]);
    ws.ok(&["ablate"]);
    let mut rdr = csv::Reader::from_path(ws.path("ablation/ablation_grid.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "temporal_kernel");
    assert_eq!(&headers[1], "triplet");
    assert_eq!(&headers[2], "seed");
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let taus: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    for t in ["3", "5", "7"] {
        assert_eq!(taus.iter().filter(|x| **x == t).count(), 2);
    }
    assert!(rows.iter().all(|r| r[2] == rows[0][2]));
    for f in ["ablation_temporal_kernel.csv", "ablation_triplet.csv"] {
        assert!(ws.path("ablation").join(f).exists(), "{f}");
    }
}
