//! C ABI over the matcher and trained link-inference models.
//!
//! Every fallible function returns an [`LoStatus`] code and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! fetched with [`lo_last_error`]. Intents and filters cross the boundary as the
//! JSON objects used in dataset files, e.g.
//! `{"action":"android.intent.action.(.*)","categories":["default"]}`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use linkoracle::icc::{AbstractFilter, AbstractIntent, TriLabel};
use linkoracle::linn::{checkpoint, CheckpointError, LinnModel};
use linkoracle::matcher::{abstract_match, qmatch};
use linkoracle::pattern::{parse_pattern, pattern_contains, pattern_overlap, PatternString};

/// Result codes.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    /// Checkpoint made for a different model layout or vocabulary.
    Mismatch = 4,
    Io = 5,
    Internal = 6,
    Panic = 7,
}

/// Matcher verdicts.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoTri {
    Zero = 0,
    One = 1,
    Top = 2,
}

impl From<TriLabel> for LoTri {
    fn from(t: TriLabel) -> Self {
        match t {
            TriLabel::Zero => LoTri::Zero,
            TriLabel::One => LoTri::One,
            TriLabel::Top => LoTri::Top,
        }
    }
}

/// A trained model loaded from a checkpoint.
pub struct LoModel {
    inner: LinnModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LoStatus, String);

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LoStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside linkoracle".to_owned());
            LoStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(LoStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }
        .ok_or_else(|| Failure(LoStatus::NullPointer, "output pointer is null".to_owned()))
}

fn pattern(s: &str) -> Result<PatternString, Failure> {
    parse_pattern(s).map_err(|e| Failure(LoStatus::Parse, format!("pattern `{s}`: {e}")))
}

unsafe fn link(
    intent: *const c_char,
    filter: *const c_char,
) -> Result<(AbstractIntent, AbstractFilter), Failure> {
    let parse_err =
        |what: &str, e: serde_json::Error| Failure(LoStatus::Parse, format!("{what}: {e}"));
    let i = serde_json::from_str(text(intent, "intent")?).map_err(|e| parse_err("intent", e))?;
    let f = serde_json::from_str(text(filter, "filter")?).map_err(|e| parse_err("filter", e))?;
    Ok((i, f))
}

fn model<'a>(m: *const LoModel) -> Result<&'a LinnModel, Failure> {
    // SAFETY: non-null handles come from `lo_model_load`.
    unsafe { m.as_ref() }
        .map(|m| &m.inner)
        .ok_or_else(|| Failure(LoStatus::NullPointer, "model handle is null".to_owned()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The caller owns the
/// returned string and releases it with [`lo_string_free`].
#[no_mangle]
pub extern "C" fn lo_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .clone()
            .map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a checkpoint file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lo_model_load(
    path: *const c_char,
    out_model: *mut *mut LoModel,
) -> LoStatus {
    guard(|| {
        let slot = out(out_model)?;
        *slot = ptr::null_mut();
        let path = text(path, "path")?;
        let inner = checkpoint::load(Path::new(path)).map_err(|e| {
            let status = match &e {
                CheckpointError::Io(_) => LoStatus::Io,
                e if e.is_mismatch() => LoStatus::Mismatch,
                _ => LoStatus::Parse,
            };
            Failure(status, format!("{path}: {e}"))
        })?;
        *slot = Box::into_raw(Box::new(LoModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from [`lo_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lo_model_free(m: *mut LoModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of trainable scalars, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lo_model_param_count(m: *const LoModel) -> u64 {
    model(m).map_or(0, |m| m.param_count() as u64)
}

/// Link probability predicted by the model.
///
/// # Safety
/// String arguments must be NUL-terminated; `m` a live handle; `out_p` valid.
#[no_mangle]
pub unsafe extern "C" fn lo_model_forward(
    m: *const LoModel,
    intent_json: *const c_char,
    filter_json: *const c_char,
    out_p: *mut f64,
) -> LoStatus {
    guard(|| {
        let slot = out(out_p)?;
        let model = model(m)?;
        let (i, f) = link(intent_json, filter_json)?;
        *slot = model
            .forward(&i, &f)
            .map_err(|e| Failure(LoStatus::Internal, e.to_string()))?;
        Ok(())
    })
}

/// Exact 0 or 1 when the matcher decides the link, the model probability
/// otherwise.
///
/// # Safety
/// As for [`lo_model_forward`].
#[no_mangle]
pub unsafe extern "C" fn lo_model_qmatch(
    m: *const LoModel,
    intent_json: *const c_char,
    filter_json: *const c_char,
    out_p: *mut f64,
) -> LoStatus {
    guard(|| {
        let slot = out(out_p)?;
        let model = model(m)?;
        let (i, f) = link(intent_json, filter_json)?;
        *slot = qmatch(&i, &f, model).map_err(|e| Failure(LoStatus::Internal, e.to_string()))?;
        Ok(())
    })
}

/// Tri-valued matcher verdict for an intent and a filter.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_tri` valid.
#[no_mangle]
pub unsafe extern "C" fn lo_abstract_match(
    intent_json: *const c_char,
    filter_json: *const c_char,
    out_tri: *mut LoTri,
) -> LoStatus {
    guard(|| {
        let slot = out(out_tri)?;
        let (i, f) = link(intent_json, filter_json)?;
        *slot = abstract_match(&i, &f).tri.into();
        Ok(())
    })
}

/// Whether two patterns share a concretization; writes 1 or 0.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_flag` valid.
#[no_mangle]
pub unsafe extern "C" fn lo_pattern_overlap(
    left: *const c_char,
    right: *const c_char,
    out_flag: *mut i32,
) -> LoStatus {
    guard(|| {
        let slot = out(out_flag)?;
        let p = pattern(text(left, "left")?)?;
        let q = pattern(text(right, "right")?)?;
        *slot = i32::from(pattern_overlap(&p, &q));
        Ok(())
    })
}

/// Whether the pattern admits the plain string; writes 1 or 0.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_flag` valid.
#[no_mangle]
pub unsafe extern "C" fn lo_pattern_contains(
    pattern_text: *const c_char,
    s: *const c_char,
    out_flag: *mut i32,
) -> LoStatus {
    guard(|| {
        let slot = out(out_flag)?;
        let p = pattern(text(pattern_text, "pattern")?)?;
        *slot = i32::from(pattern_contains(&p, text(s, "string")?));
        Ok(())
    })
}
