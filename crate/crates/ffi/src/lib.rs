//! C ABI over the triage and restoration toolkit.
//!
//! Conventions, mirrored in the generated `include/frametriage.h`:
//!
//! - Handles (`FtConfig`, `FtFrame`, `FtDetections`) are opaque pointers
//!   created and released by `ft_*_new`/`ft_*_free` pairs. A handle is
//!   never shared across threads while something writes through it.
//! - Fallible calls return [`FtStatus`]; `Ok` is zero. On any other
//!   status the thread-local message from [`ft_last_error_message`]
//!   describes the failure until the next failing call on that thread.
//! - Frames are interleaved row-major float64 in [0,1]: the sample at
//!   (x, y, c) lives at `(y * width + x) * channels + c`.
//! - Out-parameters are written only on `Ok`, except where documented.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use frametriage::geometry::{ArtifactClass, BBox};
use frametriage::io::{read_frame_png, write_frame_png, PngDepth, RunConfig};
use frametriage::metrics::compute_all;
use frametriage::pipeline::{plan_restoration, restore_frame};
use frametriage::quality::{quality_score, Disposition};
use frametriage::{Detection, Error, Frame};

/// Status code for every fallible call. Matches the CLI error categories.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    InvalidInput = 1,
    Parse = 2,
    ShapeMismatch = 3,
    Numeric = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Triage outcome for one frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtDisposition {
    Keep = 0,
    Restore = 1,
    Discard = 2,
}

/// Full-reference metric values. Undefined metrics are NaN; an exact
/// match reports PSNR as positive infinity.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FtMetricSet {
    pub psnr: f64,
    pub ssim: f64,
    pub vif: f64,
    pub reco: f64,
}

/// Opaque run configuration handle.
pub struct FtConfig(RunConfig);

/// Opaque frame handle.
pub struct FtFrame(Frame);

/// Opaque detection list handle.
pub struct FtDetections(Vec<Detection>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(status: FtStatus, message: &str) -> FtStatus {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL stripped above");
    });
    status
}

fn fail(e: &Error) -> FtStatus {
    let status = match e {
        Error::InvalidInput(_) => FtStatus::InvalidInput,
        Error::Parse { .. } => FtStatus::Parse,
        Error::ShapeMismatch(_) => FtStatus::ShapeMismatch,
        Error::Numeric(_) => FtStatus::Numeric,
        Error::Io(_) => FtStatus::Io,
    };
    remember(status, &e.to_string())
}

fn null_pointer(what: &str) -> FtStatus {
    remember(FtStatus::NullPointer, &format!("{what} is null"))
}

/// Runs a body that may panic; panics become `FtStatus::Panic` instead of
/// unwinding across the ABI boundary.
fn guarded(body: impl FnOnce() -> FtStatus) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => remember(FtStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, FtStatus> {
    if ptr.is_null() {
        return Err(null_pointer(what));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(remember(
            FtStatus::InvalidInput,
            &format!("{what} is not valid UTF-8"),
        )),
    }
}

/// Returns the message for the most recent failure on this thread. The
/// pointer stays valid until the next failing `ft_` call on the thread.
/// Never null; empty before any failure.
#[no_mangle]
pub extern "C" fn ft_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a config with built-in defaults. Never fails.
#[no_mangle]
pub extern "C" fn ft_config_default() -> *mut FtConfig {
    Box::into_raw(Box::new(FtConfig(RunConfig::default())))
}

/// Loads and validates a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_config_load(
    path: *const c_char,
    out: *mut *mut FtConfig,
) -> FtStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match RunConfig::load(path) {
            Ok(cfg) => {
                unsafe { *out = Box::into_raw(Box::new(FtConfig(cfg))) };
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a config handle. Null is a no-op.
///
/// # Safety
/// `config` must have come from this library and not been freed already.
#[no_mangle]
pub unsafe extern "C" fn ft_config_free(config: *mut FtConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Reads an 8- or 16-bit gray or RGB PNG.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_frame_read_png(
    path: *const c_char,
    out: *mut *mut FtFrame,
) -> FtStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match read_frame_png(path) {
            Ok(frame) => {
                unsafe { *out = Box::into_raw(Box::new(FtFrame(frame))) };
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes a frame as PNG. `bit_depth` is 8 or 16.
///
/// # Safety
/// `frame` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ft_frame_write_png(
    frame: *const FtFrame,
    path: *const c_char,
    bit_depth: u8,
) -> FtStatus {
    guarded(|| {
        let Some(frame) = (unsafe { frame.as_ref() }) else {
            return null_pointer("frame");
        };
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let depth = match bit_depth {
            8 => PngDepth::Eight,
            16 => PngDepth::Sixteen,
            other => {
                return remember(
                    FtStatus::InvalidInput,
                    &format!("bit_depth must be 8 or 16, got {other}"),
                )
            }
        };
        match write_frame_png(path, &frame.0, depth) {
            Ok(()) => FtStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Builds a frame from interleaved row-major float64 samples in [0,1].
/// `data` must hold `width * height * channels` values; channels is 1 or 3.
///
/// # Safety
/// `data` must point to at least that many readable doubles; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_frame_from_data(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut FtFrame,
) -> FtStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        if data.is_null() {
            return null_pointer("data");
        }
        let Some(len) = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
        else {
            return remember(FtStatus::InvalidInput, "frame dimensions overflow");
        };
        let samples = unsafe { std::slice::from_raw_parts(data, len) };
        match Frame::from_fn(width, height, channels, |x, y, c| {
            samples[(y * width + x) * channels + c]
        }) {
            Ok(frame) => {
                unsafe { *out = Box::into_raw(Box::new(FtFrame(frame))) };
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `frame` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ft_frame_width(frame: *const FtFrame) -> usize {
    unsafe { frame.as_ref() }.map_or(0, |f| f.0.width())
}

/// # Safety
/// `frame` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ft_frame_height(frame: *const FtFrame) -> usize {
    unsafe { frame.as_ref() }.map_or(0, |f| f.0.height())
}

/// # Safety
/// `frame` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ft_frame_channels(frame: *const FtFrame) -> usize {
    unsafe { frame.as_ref() }.map_or(0, |f| f.0.channels())
}

/// Copies the frame's samples into `buf` (interleaved row-major order).
/// `len` must equal `width * height * channels`.
///
/// # Safety
/// `frame` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_frame_copy_data(
    frame: *const FtFrame,
    buf: *mut f64,
    len: usize,
) -> FtStatus {
    guarded(|| {
        let Some(frame) = (unsafe { frame.as_ref() }) else {
            return null_pointer("frame");
        };
        if buf.is_null() {
            return null_pointer("buf");
        }
        let data = frame.0.data();
        if len != data.len() {
            return remember(
                FtStatus::ShapeMismatch,
                &format!("buffer holds {len} samples, frame has {}", data.len()),
            );
        }
        unsafe { std::slice::from_raw_parts_mut(buf, len) }.copy_from_slice(data);
        FtStatus::Ok
    })
}

/// Releases a frame handle. Null is a no-op.
///
/// # Safety
/// `frame` must have come from this library and not been freed already.
#[no_mangle]
pub unsafe extern "C" fn ft_frame_free(frame: *mut FtFrame) {
    if !frame.is_null() {
        drop(unsafe { Box::from_raw(frame) });
    }
}

/// Creates an empty detection list. Never fails.
#[no_mangle]
pub extern "C" fn ft_detections_new() -> *mut FtDetections {
    Box::into_raw(Box::new(FtDetections(Vec::new())))
}

/// Appends one detection. `class_code` is 0 blur, 1 bubbles,
/// 2 specularity, 3 saturation, 4 contrast, 5 misc artifact; the box is
/// normalized to [0,1] and must stay inside the frame.
///
/// # Safety
/// `detections` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ft_detections_push(
    detections: *mut FtDetections,
    class_code: u8,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    confidence: f64,
) -> FtStatus {
    guarded(|| {
        let Some(list) = (unsafe { detections.as_mut() }) else {
            return null_pointer("detections");
        };
        let class = match ArtifactClass::from_code(class_code) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        let bbox = match BBox::new(x, y, w, h) {
            Ok(b) => b,
            Err(e) => return fail(&e),
        };
        match Detection::new(class, bbox, confidence) {
            Ok(d) => {
                list.0.push(d);
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `detections` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ft_detections_len(detections: *const FtDetections) -> usize {
    unsafe { detections.as_ref() }.map_or(0, |d| d.0.len())
}

/// Releases a detection list. Null is a no-op.
///
/// # Safety
/// `detections` must have come from this library and not been freed already.
#[no_mangle]
pub unsafe extern "C" fn ft_detections_free(detections: *mut FtDetections) {
    if !detections.is_null() {
        drop(unsafe { Box::from_raw(detections) });
    }
}

/// Scores one frame's detections and triages the score. Detections under
/// the config's confidence threshold are ignored, matching the pipeline.
///
/// # Safety
/// All handles must be live; `out_qs` and `out_disposition` must be valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn ft_quality_score(
    config: *const FtConfig,
    detections: *const FtDetections,
    out_qs: *mut f64,
    out_disposition: *mut FtDisposition,
) -> FtStatus {
    guarded(|| {
        let Some(config) = (unsafe { config.as_ref() }) else {
            return null_pointer("config");
        };
        let Some(detections) = (unsafe { detections.as_ref() }) else {
            return null_pointer("detections");
        };
        if out_qs.is_null() {
            return null_pointer("out_qs");
        }
        if out_disposition.is_null() {
            return null_pointer("out_disposition");
        }
        let threshold = config.0.pipeline.confidence_threshold;
        let kept: Vec<Detection> = detections
            .0
            .iter()
            .filter(|d| d.confidence >= threshold)
            .copied()
            .collect();
        match quality_score(&kept, &config.0.quality) {
            Ok(report) => {
                unsafe {
                    *out_qs = report.qs;
                    *out_disposition = disposition_code(report.disposition);
                }
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn disposition_code(d: Disposition) -> FtDisposition {
    match d {
        Disposition::Keep => FtDisposition::Keep,
        Disposition::Restore => FtDisposition::Restore,
        Disposition::Discard => FtDisposition::Discard,
    }
}

/// Triages and, when the score calls for it, restores one frame.
///
/// Writes the disposition always. On `Restore` success, `out_frame`
/// receives a new handle the caller must free; on `Keep` it receives a
/// copy of the input; on `Discard` (including restoration failure, which
/// downgrades) it receives null and the failure message is available via
/// [`ft_last_error_message`].
///
/// # Safety
/// All handles must be live; `out_frame` and `out_disposition` must be
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ft_restore_frame(
    config: *const FtConfig,
    frame: *const FtFrame,
    detections: *const FtDetections,
    out_frame: *mut *mut FtFrame,
    out_disposition: *mut FtDisposition,
) -> FtStatus {
    guarded(|| {
        let Some(config) = (unsafe { config.as_ref() }) else {
            return null_pointer("config");
        };
        let Some(frame) = (unsafe { frame.as_ref() }) else {
            return null_pointer("frame");
        };
        let Some(detections) = (unsafe { detections.as_ref() }) else {
            return null_pointer("detections");
        };
        if out_frame.is_null() {
            return null_pointer("out_frame");
        }
        if out_disposition.is_null() {
            return null_pointer("out_disposition");
        }
        let cfg = config.0.pipeline_config();
        let kept: Vec<Detection> = detections
            .0
            .iter()
            .filter(|d| d.confidence >= cfg.confidence_threshold)
            .copied()
            .collect();
        let report = match quality_score(&kept, &cfg.quality) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        unsafe {
            *out_frame = std::ptr::null_mut();
            *out_disposition = disposition_code(report.disposition);
        }
        match report.disposition {
            Disposition::Keep => {
                unsafe { *out_frame = Box::into_raw(Box::new(FtFrame(frame.0.clone()))) };
                FtStatus::Ok
            }
            Disposition::Discard => FtStatus::Ok,
            Disposition::Restore => {
                let plan = match plan_restoration(
                    &detections.0,
                    frame.0.width(),
                    frame.0.height(),
                    &cfg,
                ) {
                    Ok(p) => p,
                    Err(e) => return fail(&e),
                };
                let result = restore_frame(&frame.0, &plan, &cfg);
                match result.frame {
                    Some(restored) => {
                        unsafe { *out_frame = Box::into_raw(Box::new(FtFrame(restored))) };
                        FtStatus::Ok
                    }
                    None => {
                        unsafe { *out_disposition = FtDisposition::Discard };
                        remember(
                            FtStatus::Ok,
                            result.failure.as_deref().unwrap_or("restoration failed"),
                        )
                    }
                }
            }
        }
    })
}

/// Computes PSNR, SSIM, VIF, and the edge-coherence ratio between two
/// frames of identical shape. Undefined values are NaN.
///
/// # Safety
/// Both frames must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_metrics(
    reference: *const FtFrame,
    test: *const FtFrame,
    out: *mut FtMetricSet,
) -> FtStatus {
    guarded(|| {
        let Some(reference) = (unsafe { reference.as_ref() }) else {
            return null_pointer("reference");
        };
        let Some(test) = (unsafe { test.as_ref() }) else {
            return null_pointer("test");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        match compute_all(&reference.0, &test.0) {
            Ok(set) => {
                unsafe {
                    *out = FtMetricSet {
                        psnr: set.psnr.unwrap_or(f64::NAN),
                        ssim: set.ssim.unwrap_or(f64::NAN),
                        vif: set.vif.unwrap_or(f64::NAN),
                        reco: set.reco.unwrap_or(f64::NAN),
                    };
                }
                FtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(ft_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_arguments_surface_as_status_not_crash() {
        let mut out: *mut FtConfig = std::ptr::null_mut();
        let status = unsafe { ft_config_load(std::ptr::null(), &mut out) };
        assert_eq!(status, FtStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(ft_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("null"));
    }
}
