//! C ABI over the gaitrisk core: load a trained checkpoint, score silhouette
//! sequences, and reach the label and AUC helpers.
//!
//! Every entry point returns a [`GrStatus`]; on failure a message is available
//! from [`gr_last_error`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gaitrisk::data::{assign_group, Attire, Direction, Group, RiskLabel, SequenceMeta, SilhouetteSequence};
use gaitrisk::eval::{compute_auc, infer_sequence_probability};
use gaitrisk::model::Model;
use gaitrisk::train::load_checkpoint;
use gaitrisk::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    CheckpointMismatch = 6,
    NonFinite = 7,
    Panic = 8,
    Other = 9,
}

/// Subject group from questionnaire scores.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrGroup {
    Experimental = 0,
    Control = 1,
    Excluded = 2,
}

/// A loaded model. Immutable after loading; may be shared across threads for scoring.
pub struct GrModel {
    model: Model<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GrStatus {
    match e {
        Error::Io { .. } => GrStatus::Io,
        Error::BadMagic { .. } | Error::Version { .. } | Error::Truncated(_) | Error::Format(_) | Error::Json(_) => {
            GrStatus::Format
        }
        Error::Shape { .. } => GrStatus::Shape,
        Error::CheckpointMismatch(_) => GrStatus::CheckpointMismatch,
        Error::NonFinite(_) => GrStatus::NonFinite,
        Error::InvalidArgument(_) | Error::ScoreOutOfRange(_) | Error::Config { .. } => GrStatus::InvalidArgument,
        _ => GrStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (GrStatus, String)>) -> GrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GrStatus::Panic
        }
    }
}

fn fail(e: Error) -> (GrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GrStatus, String) {
    (GrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (GrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GrStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

/// Message of the last failed call on this thread ("" if none). Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file. On success `*out` owns a model to release with [`gr_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_model_load(path: *const c_char, out: *mut *mut GrModel) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let ckpt = load_checkpoint(path).map_err(fail)?;
        let model = Model::new(ckpt.manifest.model.clone(), ckpt.params).map_err(fail)?;
        *out = Box::into_raw(Box::new(GrModel { model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`gr_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gr_model_free(model: *mut GrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Clip length, frame height and frame width the model expects.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_model_geometry(
    model: *const GrModel,
    clip_len: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> GrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if clip_len.is_null() || height.is_null() || width.is_null() {
            return Err(null("output pointer"));
        }
        let c = &m.model.config;
        *clip_len = c.clip_len;
        *height = c.height;
        *width = c.width;
        Ok(())
    })
}

/// Risk probability of the sequence stored in a `.gseq` file.
///
/// # Safety
/// `model` must be a live handle, `path` NUL-terminated, `out_prob` writable.
#[no_mangle]
pub unsafe extern "C" fn gr_predict_file(model: *const GrModel, path: *const c_char, out_prob: *mut f64) -> GrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out_prob.is_null() {
            return Err(null("out_prob"));
        }
        let seq = SilhouetteSequence::read(path_arg(path, "path")?).map_err(fail)?;
        *out_prob = infer_sequence_probability(&m.model, &seq).map_err(fail)?;
        Ok(())
    })
}

/// Risk probability of `frames` binary frames of `height × width` bytes each
/// (frame-major, row-major; every byte 0 or 1).
///
/// # Safety
/// `pixels` must point to `frames * height * width` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn gr_predict_frames(
    model: *const GrModel,
    pixels: *const u8,
    frames: usize,
    height: usize,
    width: usize,
    out_prob: *mut f64,
) -> GrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        if out_prob.is_null() {
            return Err(null("out_prob"));
        }
        let n = frames
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or((GrStatus::InvalidArgument, "frame buffer size overflows".to_string()))?;
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        let meta = SequenceMeta {
            subject_id: "ffi".into(),
            view_id: 1,
            attire: Attire::NoCoat,
            direction: Direction::Toward,
        };
        let seq = SilhouetteSequence::new(data, frames, height, width, meta).map_err(fail)?;
        *out_prob = infer_sequence_probability(&m.model, &seq).map_err(fail)?;
        Ok(())
    })
}

/// Group of a subject from SDS (20–80) and PHQ-9 (0–27) scores.
///
/// # Safety
/// `out_group` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_assign_group(sds: u32, phq9: u32, out_group: *mut GrGroup) -> GrStatus {
    guard(|| {
        if out_group.is_null() {
            return Err(null("out_group"));
        }
        *out_group = match assign_group(sds, phq9).map_err(fail)? {
            Group::Experimental => GrGroup::Experimental,
            Group::Control => GrGroup::Control,
            Group::Excluded => GrGroup::Excluded,
        };
        Ok(())
    })
}

/// ROC AUC of `n` scores; `is_risk[i]` nonzero marks a positive.
///
/// # Safety
/// `scores` and `is_risk` must each point to `n` readable elements.
#[no_mangle]
pub unsafe extern "C" fn gr_auc(scores: *const f64, is_risk: *const u8, n: usize, out_auc: *mut f64) -> GrStatus {
    guard(|| {
        if scores.is_null() || is_risk.is_null() {
            return Err(null("input array"));
        }
        if out_auc.is_null() {
            return Err(null("out_auc"));
        }
        let scores = std::slice::from_raw_parts(scores, n);
        let labels: Vec<RiskLabel> = std::slice::from_raw_parts(is_risk, n)
            .iter()
            .map(|&r| if r != 0 { RiskLabel::Risk } else { RiskLabel::Control })
            .collect();
        *out_auc = compute_auc(scores, &labels).map_err(fail)?.auc;
        Ok(())
    })
}
