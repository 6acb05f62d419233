//! C ABI over the `raes` streaming pipeline.
//!
//! Handles are opaque and owned by the caller: every `*_new`/`*_load`
//! has a matching `*_free`. Functions return a [`RaesStatus`]; on failure
//! `raes_last_error` describes the most recent error on the calling thread.
//! No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use raes::nn::{load_weights, Model, WeightBundle};
use raes::pipeline::{MaskSource, PipelineConfig, PipelineState};
use raes::Error;

/// Samples between an input sample and its processed output.
pub const RAES_LATENCY_SAMPLES: u32 = 128;
/// Samples per processing hop.
pub const RAES_HOP_SAMPLES: u32 = 64;
pub const RAES_SAMPLE_RATE: u32 = 16_000;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// The weight file is malformed or does not match the architecture.
    WeightFormat = 4,
    LengthMismatch = 5,
    /// Non-finite input samples or activations.
    NonFinite = 6,
    Internal = 7,
}

/// A loaded, validated model. Shareable between pipelines.
pub struct RaesModel {
    model: Arc<Model>,
}

/// One streaming echo suppression session.
pub struct RaesPipeline {
    state: PipelineState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RaesStatus {
    match e {
        Error::Weights(_) | Error::Shape { .. } => RaesStatus::WeightFormat,
        Error::Io { .. } | Error::Wav { .. } => RaesStatus::Io,
        Error::LengthMismatch { .. } => RaesStatus::LengthMismatch,
        Error::NonFinite(_) | Error::InvalidAudio(_) => RaesStatus::NonFinite,
        Error::Config(_) => RaesStatus::InvalidArgument,
        _ => RaesStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RaesStatus, String)>) -> RaesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RaesStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RaesStatus::Internal
        }
    }
}

fn fail(e: Error) -> (RaesStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RaesStatus, String) {
    (RaesStatus::NullPointer, format!("{what} is null"))
}

fn finish_model(
    bundle: WeightBundle,
    out: *mut *mut RaesModel,
) -> Result<(), (RaesStatus, String)> {
    let model = Model::new(Arc::new(bundle)).map_err(fail)?;
    let handle = Box::new(RaesModel {
        model: Arc::new(model),
    });
    // SAFETY: caller checked `out` for null.
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn raes_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread. Empty if nothing failed yet.
#[no_mangle]
pub extern "C" fn raes_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a weight file from a UTF-8 path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn raes_model_load(
    path: *const c_char,
    out: *mut *mut RaesModel,
) -> RaesStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (RaesStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let bundle = WeightBundle::load(Path::new(path)).map_err(fail)?;
        finish_model(bundle, out)
    })
}

/// Loads a weight file from memory. The bytes are copied.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn raes_model_load_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut RaesModel,
) -> RaesStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let bytes = std::slice::from_raw_parts(data, len);
        let bundle = load_weights(bytes).map_err(|e| fail(e.into()))?;
        finish_model(bundle, out)
    })
}

/// Number of scalar parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn raes_model_parameter_count(model: *const RaesModel) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.model.weights().parameter_count())
}

/// # Safety
/// `model` must be null or a handle from `raes_model_load*` not yet freed.
/// Pipelines created from it stay valid.
#[no_mangle]
pub unsafe extern "C" fn raes_model_free(model: *mut RaesModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Creates a pipeline. A null `model` runs the adaptive filter alone.
/// `dtd_gate` in [0.5, 1] enables DTD post-processing at that confidence;
/// 0 disables it.
///
/// # Safety
/// `model` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn raes_pipeline_new(
    model: *const RaesModel,
    dtd_gate: f32,
    out: *mut *mut RaesPipeline,
) -> RaesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let source = match model.as_ref() {
            Some(m) => MaskSource::Network(m.model.clone()),
            None => MaskSource::AfOnly,
        };
        let cfg = PipelineConfig {
            dtd_gate: (dtd_gate != 0.0).then_some(dtd_gate),
            ..PipelineConfig::default()
        };
        let state = PipelineState::new(source, cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(RaesPipeline { state }));
        Ok(())
    })
}

/// Processes `len` samples of microphone and far-end audio and writes
/// `len` output samples, delayed by `RAES_LATENCY_SAMPLES`. Any chunk
/// length is accepted.
///
/// # Safety
/// `pipeline` must be a live handle; `mic` and `farend` must hold `len`
/// readable floats and `out` `len` writable floats. `out` may alias `mic`.
#[no_mangle]
pub unsafe extern "C" fn raes_pipeline_process(
    pipeline: *mut RaesPipeline,
    mic: *const f32,
    farend: *const f32,
    len: usize,
    out: *mut f32,
) -> RaesStatus {
    guard(|| {
        let p = pipeline.as_mut().ok_or_else(|| null("pipeline"))?;
        if len == 0 {
            return Ok(());
        }
        if mic.is_null() || farend.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let mic = std::slice::from_raw_parts(mic, len).to_vec();
        let far = std::slice::from_raw_parts(farend, len);
        let y = p.state.process(&mic, far).map_err(fail)?;
        ptr::copy_nonoverlapping(y.as_ptr(), out, len);
        Ok(())
    })
}

/// Drains the last `RAES_LATENCY_SAMPLES` outputs (plus any partial hop)
/// by feeding silence. Writes up to `capacity` samples and stores the
/// count produced in `written`.
///
/// # Safety
/// `pipeline` must be a live handle; `out` must hold `capacity` writable
/// floats; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn raes_pipeline_flush(
    pipeline: *mut RaesPipeline,
    out: *mut f32,
    capacity: usize,
    written: *mut usize,
) -> RaesStatus {
    guard(|| {
        let p = pipeline.as_mut().ok_or_else(|| null("pipeline"))?;
        if out.is_null() || written.is_null() {
            return Err(null("buffer"));
        }
        let tail = p.state.flush().map_err(fail)?;
        if tail.len() > capacity {
            return Err((
                RaesStatus::InvalidArgument,
                format!("flush needs {} samples, capacity is {capacity}", tail.len()),
            ));
        }
        ptr::copy_nonoverlapping(tail.as_ptr(), out, tail.len());
        *written = tail.len();
        Ok(())
    })
}

/// Hops processed so far, or 0 for a null handle.
///
/// # Safety
/// `pipeline` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn raes_pipeline_frames(pipeline: *const RaesPipeline) -> u64 {
    pipeline.as_ref().map_or(0, |p| p.state.frames_processed())
}

/// # Safety
/// `pipeline` must be null or a handle from `raes_pipeline_new` not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn raes_pipeline_free(pipeline: *mut RaesPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_core() {
        assert_eq!(RAES_LATENCY_SAMPLES as usize, raes::stft::WINDOW_SIZE);
        assert_eq!(RAES_HOP_SAMPLES as usize, raes::stft::HOP);
        assert_eq!(RAES_SAMPLE_RATE, raes::audio::DEFAULT_SAMPLE_RATE);
    }

    #[test]
    fn error_mapping() {
        let e = Error::Weights(raes::nn::WeightError::FingerprintMismatch);
        assert_eq!(status_of(&e), RaesStatus::WeightFormat);
        assert_eq!(
            status_of(&Error::LengthMismatch { left: 1, right: 2 }),
            RaesStatus::LengthMismatch
        );
    }
}
