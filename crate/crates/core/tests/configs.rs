use std::path::{Path, PathBuf};

use gaitrisk::config::{ExperimentConfig, PathsConfig};

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = ExperimentConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn same_but_paths(mut cfg: ExperimentConfig, preset: ExperimentConfig, tag: &str) {
    let root = PathBuf::from("runs").join(tag);
    assert_eq!(
        cfg.paths,
        PathsConfig {
            data_dir: root.join("data"),
            run_dir: root.join("train"),
            eval_dir: root.join("eval"),
            ablation_dir: root.join("ablation"),
        }
    );
    cfg.paths = preset.paths.clone();
    assert_eq!(cfg, preset);
}

#[test]
fn shipped_configs_match_presets() {
    same_but_paths(shipped("canonical.toml"), ExperimentConfig::canonical(), "canonical");
    same_but_paths(shipped("desk.toml"), ExperimentConfig::desk(), "desk");
    same_but_paths(shipped("smoke.toml"), ExperimentConfig::smoke(), "smoke");
}

#[test]
fn unknown_fields_are_rejected() {
    let err = ExperimentConfig::from_toml_str("[training]\nstepz = 3\n").unwrap_err();
    assert!(err.to_string().contains("stepz"), "{err}");
}
