//! C ABI over `bayescp` predictors.
//!
//! Predictors are opaque heap handles. Every fallible call returns a
//! [`BcpStatus`]; on failure the message is available from
//! [`bcp_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bayescp::{Error, Predictor, PredictorConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad JSON, unknown algorithm, bad level or other configuration problem.
    InvalidArgument = 3,
    /// A score outside `[0, R]`.
    OutOfDomain = 4,
    Snapshot = 5,
    Panic = 6,
    Internal = 7,
}

/// Opaque predictor handle.
pub struct BcpPredictor {
    inner: Predictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> BcpStatus {
    match e {
        Error::OutOfDomain { .. } => BcpStatus::OutOfDomain,
        Error::Snapshot(_) => BcpStatus::Snapshot,
        Error::InvalidLevel(_)
        | Error::InvalidDomain(_)
        | Error::InvalidPrior(_)
        | Error::InvalidConfig(_)
        | Error::TooFewLevels => BcpStatus::InvalidArgument,
        _ => BcpStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (BcpStatus, String)>) -> BcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BcpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BcpStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (BcpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BcpStatus, String) {
    (BcpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (BcpStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (BcpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a>(p: *mut BcpPredictor) -> Result<&'a mut BcpPredictor, (BcpStatus, String)> {
    p.as_mut().ok_or_else(|| null("predictor"))
}

/// Builds a predictor from a JSON config such as `{"algorithm": "bayesian"}`.
/// `horizon` (0 for unknown) sets the default grid size `ceil(sqrt(horizon))`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_from_json(
    json: *const c_char,
    horizon: u64,
    out: *mut *mut BcpPredictor,
) -> BcpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let cfg: PredictorConfig =
            serde_json::from_str(text).map_err(|e| (BcpStatus::InvalidArgument, e.to_string()))?;
        let inner = cfg
            .build((horizon > 0).then_some(horizon))
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BcpPredictor { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_free(p: *mut BcpPredictor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Answers a query at level `alpha` for the current round and records it.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_predict(
    p: *mut BcpPredictor,
    alpha: f64,
    out: *mut f64,
) -> BcpStatus {
    guard(|| {
        let h = handle(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = h.inner.predict(alpha).map_err(lib_err)?;
        Ok(())
    })
}

/// Like [`bcp_predictor_predict`] but leaves no trace in the predictor.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_threshold(
    p: *const BcpPredictor,
    alpha: f64,
    out: *mut f64,
) -> BcpStatus {
    guard(|| {
        let h = p.as_ref().ok_or_else(|| null("predictor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = h.inner.threshold(alpha).map_err(lib_err)?;
        Ok(())
    })
}

/// Reveals the true score and advances to the next round. If `out_loss` is
/// non-null it receives the summed quantile loss of this round's queries.
///
/// # Safety
/// `p` must be a live handle; `out_loss` may be null.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_update(
    p: *mut BcpPredictor,
    r_star: f64,
    out_loss: *mut f64,
) -> BcpStatus {
    guard(|| {
        let h = handle(p)?;
        let records = h.inner.update(r_star).map_err(lib_err)?;
        if !out_loss.is_null() {
            *out_loss = records.iter().map(|r| r.loss).sum();
        }
        Ok(())
    })
}

/// Current round, starting at 1; 0 for a null handle.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_round(p: *const BcpPredictor) -> u64 {
    p.as_ref().map_or(0, |h| h.inner.round())
}

/// Serializes the predictor to JSON. Free the string with [`bcp_string_free`].
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_snapshot(
    p: *const BcpPredictor,
    out: *mut *mut c_char,
) -> BcpStatus {
    guard(|| {
        let h = p.as_ref().ok_or_else(|| null("predictor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = h.inner.to_snapshot().map_err(lib_err)?;
        let c = CString::new(json).map_err(|e| (BcpStatus::Internal, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Rebuilds a predictor from [`bcp_predictor_snapshot`] output.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bcp_predictor_restore(
    json: *const c_char,
    out: *mut *mut BcpPredictor,
) -> BcpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Predictor::from_snapshot(read_str(json, "json")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BcpPredictor { inner }));
        Ok(())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Quantile loss `(1[r >= r_star] - alpha)(r - r_star)`.
#[no_mangle]
pub extern "C" fn bcp_quantile_loss(alpha: f64, r: f64, r_star: f64) -> f64 {
    bayescp::types::quantile_loss(alpha, r, r_star)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bcp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
