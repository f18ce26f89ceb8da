//! C ABI over `grc-core`.
//!
//! Conventions:
//! - every fallible function returns a [`GrcStatus`] and writes results
//!   through out-pointers; on failure [`grc_last_error_message`] describes
//!   the error on the calling thread;
//! - strings are NUL-terminated UTF-8; strings returned by the library must
//!   be released with [`grc_string_free`], decisions with
//!   [`grc_decision_free`], controllers with [`grc_controller_free`];
//! - panics never cross the boundary, they become `GRC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use grc_core::consensus::summarize_texts;
use grc_core::controller::{decide, default_family, operating_point_for, run_pipeline, validate_family, Ablation};
use grc_core::evaluation::metrics::{meltdown_rate, percentile_p99};
use grc_core::gateway::{Gateway, GatewayError, Generator, GeneratorQuery, GeneratorReply};
use grc_core::image::{Channels, CropImage};
use grc_core::screening::ScreeningError;
use grc_core::{Decision, OperatingPoint, Outcome, ProtocolConfig, Reason};
use serde::Deserialize;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidConfig = 4,
    /// The crop has no foreground, so no length bound exists.
    NoForeground = 5,
    /// A conditional metric over an empty set.
    Undefined = 6,
    UnknownOperatingPoint = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrcReason {
    Accepted = 0,
    InsufficientEvidence = 1,
    NoUniqueMode = 2,
    LowConsensus = 3,
    HighDispersion = 4,
    LowConfidence = 5,
}

impl From<Reason> for GrcReason {
    fn from(r: Reason) -> Self {
        match r {
            Reason::Accepted => GrcReason::Accepted,
            Reason::InsufficientEvidence => GrcReason::InsufficientEvidence,
            Reason::NoUniqueMode => GrcReason::NoUniqueMode,
            Reason::LowConsensus => GrcReason::LowConsensus,
            Reason::HighDispersion => GrcReason::HighDispersion,
            Reason::LowConfidence => GrcReason::LowConfidence,
        }
    }
}

/// An accept/abstain decision. `transcript` is NULL on abstention;
/// `vote_fraction` and `dispersion` are NaN when there is no unique mode.
#[repr(C)]
#[derive(Debug)]
pub struct GrcDecision {
    pub accepted: bool,
    pub reason: GrcReason,
    pub transcript: *mut c_char,
    pub n_valid: u32,
    pub vote_fraction: f64,
    pub dispersion: f64,
}

/// Length-bound parameters; pass NULL anywhere one is accepted for defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GrcLengthBoundParams {
    pub alpha: f64,
    pub min_bound: u32,
    pub aspect_per_char: f64,
}

/// Opaque controller: view protocol, screening parameters, and
/// operating-point family.
pub struct GrcController {
    protocol: ProtocolConfig,
    length_bound: grc_core::LengthBoundParams,
    family: Vec<OperatingPoint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerToml {
    #[serde(default)]
    protocol: ProtocolConfig,
    #[serde(default)]
    length_bound: grc_core::LengthBoundParams,
    #[serde(default = "default_family")]
    operating_points: Vec<OperatingPoint>,
}

/// Writes one view's transcription into `out_text` (capacity `out_cap`,
/// no terminator needed) and its byte length into `out_len`. Returns 0 on
/// success; any other value marks the view as failed. A length above
/// `out_cap` is treated as a failure. `channels` is 1 (gray) or 3 (RGB).
pub type GrcGenerateFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        pixels: *const u8,
        width: u32,
        height: u32,
        channels: u32,
        prompt: *const c_char,
        view_index: u32,
        out_text: *mut c_char,
        out_cap: usize,
        out_len: *mut usize,
    ) -> i32,
>;

/// Reply buffer size offered to the generator callback.
pub const GRC_MAX_REPLY_BYTES: usize = 4096;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes removed"));
}

fn fail(status: GrcStatus, msg: impl Into<String>) -> GrcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> GrcStatus) -> GrcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(GrcStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, GrcStatus> {
    if p.is_null() {
        return Err(fail(GrcStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GrcStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], GrcStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(GrcStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn to_c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', "")).expect("NUL bytes removed").into_raw()
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(GrcStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        }
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failure on this thread. Valid until the next
/// library call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn grc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn grc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Levenshtein distance over Unicode scalar values.
///
/// # Safety
/// `a` and `b` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_edit_distance(a: *const c_char, b: *const c_char, out: *mut usize) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let a = tri!(read_str(a, "a"));
        let b = tri!(read_str(b, "b"));
        *out = grc_core::edit_distance(a, b);
        GrcStatus::Ok
    })
}

/// `min(1, ED(a, b) / max(1, |a|, |b|))`.
///
/// # Safety
/// `a` and `b` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_bounded_distance(a: *const c_char, b: *const c_char, out: *mut f64) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let a = tri!(read_str(a, "a"));
        let b = tri!(read_str(b, "b"));
        *out = grc_core::bounded_normalized_distance(a, b);
        GrcStatus::Ok
    })
}

/// Canonical form of `raw`. Free the result with `grc_string_free`.
///
/// # Safety
/// `raw` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_canonicalize(raw: *const c_char, case_insensitive: bool, out: *mut *mut c_char) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let raw = tri!(read_str(raw, "raw"));
        *out = to_c_string(&grc_core::canonicalize(raw, case_insensitive).text);
        GrcStatus::Ok
    })
}

/// Character error rate of `prediction` against `ground_truth`, both
/// canonicalized first. Fails if the ground truth canonicalizes to empty.
///
/// # Safety
/// Both strings must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_cer(
    prediction: *const c_char,
    ground_truth: *const c_char,
    case_insensitive: bool,
    out: *mut f64,
) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let p = tri!(read_str(prediction, "prediction"));
        let g = tri!(read_str(ground_truth, "ground_truth"));
        match grc_core::evaluation::cer(p, g, case_insensitive) {
            Ok(v) => {
                *out = v;
                GrcStatus::Ok
            }
            Err(e) => fail(GrcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Fraction of `cers` at or above `delta`. `GRC_STATUS_UNDEFINED` for n = 0.
///
/// # Safety
/// `cers` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_meltdown_rate(cers: *const f64, n: usize, delta: f64, out: *mut f64) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let cers = tri!(read_slice(cers, n, "cers"));
        match meltdown_rate(cers, delta) {
            Ok(v) => {
                *out = v;
                GrcStatus::Ok
            }
            Err(e) => fail(GrcStatus::Undefined, e.to_string()),
        }
    })
}

/// Nearest-rank 99th percentile. `GRC_STATUS_UNDEFINED` for n = 0.
///
/// # Safety
/// `values` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_percentile_p99(values: *const f64, n: usize, out: *mut f64) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let values = tri!(read_slice(values, n, "values"));
        match percentile_p99(values) {
            Ok(v) => {
                *out = v;
                GrcStatus::Ok
            }
            Err(e) => fail(GrcStatus::Undefined, e.to_string()),
        }
    })
}

fn length_bound_params(p: *const GrcLengthBoundParams) -> Result<grc_core::LengthBoundParams, GrcStatus> {
    let params = if p.is_null() {
        grc_core::LengthBoundParams::default()
    } else {
        // SAFETY: caller guarantees a non-NULL pointer is readable.
        let p = unsafe { *p };
        grc_core::LengthBoundParams {
            alpha: p.alpha,
            min_bound: p.min_bound,
            aspect_per_char: p.aspect_per_char,
            ..Default::default()
        }
    };
    params
        .validate()
        .map_err(|e| fail(GrcStatus::InvalidArgument, e.to_string()))?;
    Ok(params)
}

unsafe fn read_image(pixels: *const u8, width: u32, height: u32, channels: u32, id: &str) -> Result<CropImage, GrcStatus> {
    let ch = match channels {
        1 => Channels::Gray,
        3 => Channels::Rgb,
        other => return Err(fail(GrcStatus::InvalidArgument, format!("channels must be 1 or 3, got {other}"))),
    };
    let len = width as usize * height as usize * ch.count();
    let px = read_slice(pixels, len, "pixels")?;
    CropImage::new(px.to_vec(), width, height, ch, id).map_err(|e| fail(GrcStatus::InvalidArgument, e.to_string()))
}

/// Geometric length bound of a row-major 8-bit crop (`channels` 1 or 3).
/// `params` may be NULL for defaults.
///
/// # Safety
/// `pixels` must point to `width * height * channels` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_length_bound(
    pixels: *const u8,
    width: u32,
    height: u32,
    channels: u32,
    params: *const GrcLengthBoundParams,
    out: *mut u32,
) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let params = tri!(length_bound_params(params));
        let img = tri!(read_image(pixels, width, height, channels, ""));
        match grc_core::geometric_length_bound(&img, &params) {
            Ok(v) => {
                *out = v;
                GrcStatus::Ok
            }
            Err(e @ ScreeningError::NoForeground) => fail(GrcStatus::NoForeground, e.to_string()),
            Err(e) => fail(GrcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Controller with the default protocol, screening, and operating points.
#[no_mangle]
pub extern "C" fn grc_controller_new_default() -> *mut GrcController {
    Box::into_raw(Box::new(GrcController {
        protocol: ProtocolConfig::default(),
        length_bound: grc_core::LengthBoundParams::default(),
        family: default_family(),
    }))
}

/// Controller from TOML with optional `[protocol]`, `[length_bound]`, and
/// `[[operating_points]]` tables, as in the run config.
///
/// # Safety
/// `toml_text` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grc_controller_from_toml(toml_text: *const c_char, out: *mut *mut GrcController) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let text = tri!(read_str(toml_text, "toml_text"));
        let parsed: ControllerToml = match toml::from_str(text) {
            Ok(p) => p,
            Err(e) => return fail(GrcStatus::InvalidConfig, e.to_string()),
        };
        if let Err(e) = parsed.protocol.validate() {
            return fail(GrcStatus::InvalidConfig, e.to_string());
        }
        if let Err(e) = parsed.length_bound.validate() {
            return fail(GrcStatus::InvalidConfig, e.to_string());
        }
        if let Err(e) = validate_family(&parsed.operating_points, parsed.protocol.k_views) {
            return fail(GrcStatus::InvalidConfig, e.to_string());
        }
        *out = Box::into_raw(Box::new(GrcController {
            protocol: parsed.protocol,
            length_bound: parsed.length_bound,
            family: parsed.operating_points,
        }));
        GrcStatus::Ok
    })
}

/// Releases a controller. NULL is ignored.
///
/// # Safety
/// `ctrl` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn grc_controller_free(ctrl: *mut GrcController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Number of views the controller queries per crop.
///
/// # Safety
/// `ctrl` must be a live controller.
#[no_mangle]
pub unsafe extern "C" fn grc_controller_k_views(ctrl: *const GrcController) -> u32 {
    ctrl.as_ref().map_or(0, |c| c.protocol.k_views)
}

fn export_decision(d: Decision) -> GrcDecision {
    GrcDecision {
        accepted: d.outcome == Outcome::Accept,
        reason: d.reason.into(),
        transcript: d.transcript.as_deref().map_or(ptr::null_mut(), to_c_string),
        n_valid: d.summary.n_valid as u32,
        vote_fraction: d.summary.vote_fraction.unwrap_or(f64::NAN),
        dispersion: d.summary.dispersion.unwrap_or(f64::NAN),
    }
}

fn lookup_op(ctrl: &GrcController, m: u32) -> Result<OperatingPoint, GrcStatus> {
    operating_point_for(m, &ctrl.family).map_err(|e| fail(GrcStatus::UnknownOperatingPoint, e.to_string()))
}

/// Decides from already-collected view outputs. Each text is canonicalized
/// under the controller's case rule; only entries with `valid[i]` count.
///
/// # Safety
/// `texts` and `valid` must each hold `n` entries; `ctrl` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn grc_controller_decide(
    ctrl: *const GrcController,
    m: u32,
    texts: *const *const c_char,
    valid: *const bool,
    n: usize,
    out: *mut GrcDecision,
) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let Some(ctrl) = ctrl.as_ref() else {
            return fail(GrcStatus::NullPointer, "ctrl is NULL");
        };
        let op = tri!(lookup_op(ctrl, m));
        let texts = tri!(read_slice(texts, n, "texts"));
        let valid = tri!(read_slice(valid, n, "valid"));
        let mut kept = Vec::new();
        for (i, (&t, &ok)) in texts.iter().zip(valid).enumerate() {
            let t = tri!(read_str(t, &format!("texts[{i}]")));
            if ok {
                kept.push(grc_core::canonicalize(t, ctrl.protocol.case_insensitive).text);
            }
        }
        *out = export_decision(decide(&summarize_texts(&kept), &op));
        GrcStatus::Ok
    })
}

struct CallbackGenerator {
    callback: unsafe extern "C" fn(
        *mut c_void,
        *const u8,
        u32,
        u32,
        u32,
        *const c_char,
        u32,
        *mut c_char,
        usize,
        *mut usize,
    ) -> i32,
    user_data: *mut c_void,
}

// SAFETY: the pipeline runs inside a one-thread pool, so the callback and
// `user_data` are only ever touched from one thread at a time.
unsafe impl Send for CallbackGenerator {}
unsafe impl Sync for CallbackGenerator {}

impl Generator for CallbackGenerator {
    fn identity(&self) -> String {
        format!("c-callback:{:p}", self.callback as *const ())
    }

    fn generate(&self, q: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError> {
        let prompt = CString::new(q.prompt.replace('\0', "")).expect("NUL bytes removed");
        let mut buf = vec![0u8; GRC_MAX_REPLY_BYTES];
        let mut len = 0usize;
        // SAFETY: buffers live across the call; the caller vouched for the callback.
        let rc = unsafe {
            (self.callback)(
                self.user_data,
                q.image.pixels().as_ptr(),
                q.image.width(),
                q.image.height(),
                q.image.channels().count() as u32,
                prompt.as_ptr(),
                q.view_index,
                buf.as_mut_ptr().cast(),
                buf.len(),
                &mut len,
            )
        };
        if rc != 0 {
            return Err(GatewayError::BackendUnavailable {
                attempts: 1,
                message: format!("generator callback returned {rc}"),
            });
        }
        if len > buf.len() {
            return Err(GatewayError::MalformedReply(format!("reply length {len} exceeds buffer")));
        }
        buf.truncate(len);
        String::from_utf8(buf)
            .map(GeneratorReply::text)
            .map_err(|_| GatewayError::MalformedReply("reply is not valid UTF-8".into()))
    }
}

/// Runs the full controller on one crop, querying `generate` once per view
/// (serially, possibly from a worker thread). `source_id` keys the
/// view-protocol randomness. A failed callback marks that view absent.
///
/// # Safety
/// `pixels` must point to `width * height * channels` bytes; `generate`
/// must be safe to call with `user_data`; `ctrl`, `source_id`, and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn grc_controller_run(
    ctrl: *const GrcController,
    m: u32,
    pixels: *const u8,
    width: u32,
    height: u32,
    channels: u32,
    source_id: *const c_char,
    generate: GrcGenerateFn,
    user_data: *mut c_void,
    out: *mut GrcDecision,
) -> GrcStatus {
    guard(|| {
        out_ptr!(out);
        let Some(ctrl) = ctrl.as_ref() else {
            return fail(GrcStatus::NullPointer, "ctrl is NULL");
        };
        let Some(callback) = generate else {
            return fail(GrcStatus::NullPointer, "generate is NULL");
        };
        let op = tri!(lookup_op(ctrl, m));
        let id = tri!(read_str(source_id, "source_id"));
        let img = tri!(read_image(pixels, width, height, channels, id));
        let gateway = Gateway::new(Arc::new(CallbackGenerator { callback, user_data }), false);
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(p) => p,
            Err(e) => return fail(GrcStatus::Panic, e.to_string()),
        };
        let result = pool.install(|| {
            run_pipeline(&img, &ctrl.protocol, &gateway, &ctrl.length_bound, &op, Ablation::Full)
        });
        match result {
            Ok(d) => {
                *out = export_decision(d);
                GrcStatus::Ok
            }
            Err(e) => fail(GrcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Releases the transcript inside a decision and resets it to NULL.
///
/// # Safety
/// `d` must point to a decision filled by this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn grc_decision_free(d: *mut GrcDecision) {
    if let Some(d) = d.as_mut() {
        grc_string_free(d.transcript);
        d.transcript = ptr::null_mut();
    }
}
