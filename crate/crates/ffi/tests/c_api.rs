use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use gaitrisk::data::{RiskLabel, SilhouetteSequence};
use gaitrisk::eval::{compute_auc, infer_sequence_probability};
use gaitrisk::model::{Model, ModelConfig};
use gaitrisk::synth::{generate_dataset, GeneratorConfig};
use gaitrisk::train::{save_checkpoint, TrainConfig, Trainer};
use gaitrisk_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    ckpt: CString,
    seq_path: CString,
    seq: SilhouetteSequence,
    model: Model<f32>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let gen = GeneratorConfig {
        n_subjects: 6,
        seed: 3,
        min_frames: 40,
        max_frames: 70,
        ..GeneratorConfig::default()
    };
    let data_dir = dir.path().join("data");
    let ds = generate_dataset(&gen, &data_dir).unwrap();
    let model_cfg = ModelConfig::with_channels([2, 4, 8]);
    let train = TrainConfig {
        steps: 0,
        subjects_per_batch: 2,
        sequences_per_subject: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let trainer = Trainer::new(model_cfg.clone(), train, &ds, None).unwrap();
    let ckpt = trainer.checkpoint();
    let ckpt_path = dir.path().join("model.gckp");
    save_checkpoint(&ckpt_path, &ckpt).unwrap();
    // a sequence shorter than the clip exercises padding
    let idx = ds.sequences.iter().position(|s| s.len() < 60).unwrap_or(0);
    let seq_path = data_dir.join(&ds.index.sequences[idx].path);
    Fixture {
        ckpt: cstr(&ckpt_path),
        seq_path: cstr(&seq_path),
        seq: ds.sequences[idx].clone(),
        model: Model::new(model_cfg, ckpt.params).unwrap(),
        _dir: dir,
    }
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gr_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn predictions_match_core_inference() {
    let f = fixture();
    let expected = infer_sequence_probability(&f.model, &f.seq).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(gr_model_load(f.ckpt.as_ptr(), &mut m), GrStatus::Ok);
        assert!(!m.is_null());

        let (mut t, mut h, mut w) = (0, 0, 0);
        assert_eq!(gr_model_geometry(m, &mut t, &mut h, &mut w), GrStatus::Ok);
        assert_eq!((t, h, w), (60, 64, 44));

        let mut p = f64::NAN;
        assert_eq!(gr_predict_file(m, f.seq_path.as_ptr(), &mut p), GrStatus::Ok);
        assert_eq!(p, expected);

        let mut q = f64::NAN;
        let px = f.seq.pixels();
        assert_eq!(
            gr_predict_frames(m, px.as_ptr(), f.seq.len(), f.seq.height(), f.seq.width(), &mut q),
            GrStatus::Ok
        );
        assert_eq!(q, expected);
        assert!((0.0..=1.0).contains(&q));
        gr_model_free(m);
    }
}

#[test]
fn shape_and_argument_errors_are_reported() {
    let f = fixture();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(gr_model_load(f.ckpt.as_ptr(), &mut m), GrStatus::Ok);
        let frames = vec![0u8; 10 * 32 * 22];
        let mut p = 0.0;
        assert_eq!(
            gr_predict_frames(m, frames.as_ptr(), 10, 32, 22, &mut p),
            GrStatus::Shape
        );
        assert!(!last_error().is_empty());

        let bad = vec![2u8; 60 * 64 * 44];
        assert_ne!(gr_predict_frames(m, bad.as_ptr(), 60, 64, 44, &mut p), GrStatus::Ok);

        assert_eq!(
            gr_predict_frames(m, ptr::null(), 60, 64, 44, &mut p),
            GrStatus::NullPointer
        );
        assert_eq!(
            gr_predict_file(ptr::null(), f.seq_path.as_ptr(), &mut p),
            GrStatus::NullPointer
        );
        assert_eq!(
            gr_predict_file(m, f.seq_path.as_ptr(), ptr::null_mut()),
            GrStatus::NullPointer
        );
        gr_model_free(m);
        gr_model_free(ptr::null_mut());
    }
}

#[test]
fn load_failures_leave_a_null_handle() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cstr(&dir.path().join("absent.gckp"));
    let garbage_path = dir.path().join("garbage.gckp");
    std::fs::write(&garbage_path, b"NOPE and some more bytes here").unwrap();
    let garbage = cstr(&garbage_path);
    unsafe {
        let mut m = std::ptr::dangling_mut::<GrModel>();
        assert_eq!(gr_model_load(missing.as_ptr(), &mut m), GrStatus::Io);
        assert!(m.is_null());
        assert!(last_error().contains("absent.gckp"));
        assert_eq!(gr_model_load(garbage.as_ptr(), &mut m), GrStatus::Format);
        assert!(m.is_null());
        assert_eq!(gr_model_load(ptr::null(), &mut m), GrStatus::NullPointer);
        assert_eq!(gr_model_load(missing.as_ptr(), ptr::null_mut()), GrStatus::NullPointer);
    }
}

#[test]
fn group_assignment_follows_score_thresholds() {
    let cases = [
        (59, 9, GrGroup::Experimental),
        (80, 27, GrGroup::Experimental),
        (46, 1, GrGroup::Control),
        (20, 0, GrGroup::Control),
        (50, 5, GrGroup::Excluded),
        (59, 8, GrGroup::Excluded),
    ];
    for (sds, phq, want) in cases {
        let mut g = GrGroup::Excluded;
        assert_eq!(
            unsafe { gr_assign_group(sds, phq, &mut g) },
            GrStatus::Ok,
            "{sds}/{phq}"
        );
        assert_eq!(g, want, "{sds}/{phq}");
    }
    let mut g = GrGroup::Control;
    assert_eq!(unsafe { gr_assign_group(19, 0, &mut g) }, GrStatus::InvalidArgument);
    assert_eq!(unsafe { gr_assign_group(40, 28, &mut g) }, GrStatus::InvalidArgument);
}

#[test]
fn auc_matches_core() {
    let scores = [0.9, 0.8, 0.8, 0.3, 0.6, 0.1];
    let risk = [1u8, 0, 1, 0, 1, 0];
    let labels: Vec<_> = risk
        .iter()
        .map(|&r| if r == 1 { RiskLabel::Risk } else { RiskLabel::Control })
        .collect();
    let mut auc = 0.0;
    assert_eq!(
        unsafe { gr_auc(scores.as_ptr(), risk.as_ptr(), scores.len(), &mut auc) },
        GrStatus::Ok
    );
    assert_eq!(auc, compute_auc(&scores, &labels).unwrap().auc);
    // 7 of 9 pairs ordered, one tie, one inverted
    assert!((auc - 7.5 / 9.0).abs() < 1e-12);

    let only_risk = [1u8, 1];
    assert_ne!(
        unsafe { gr_auc(scores.as_ptr(), only_risk.as_ptr(), 2, &mut auc) },
        GrStatus::Ok
    );
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(gr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));

    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gaitrisk.h")).unwrap();
    for sym in [
        "typedef struct GrModel GrModel;",
        "GR_STATUS_OK = 0",
        "GR_STATUS_CHECKPOINT_MISMATCH",
        "gr_model_load(",
        "gr_model_free(",
        "gr_model_geometry(",
        "gr_predict_file(",
        "gr_predict_frames(",
        "gr_assign_group(",
        "gr_auc(",
        "gr_last_error(",
        "gr_version(",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
