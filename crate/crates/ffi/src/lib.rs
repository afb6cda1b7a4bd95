//! C ABI over the qsopt ask-tell campaign.
//!
//! Every function returns a [`QsoptStatus`]; on failure the message is
//! available from [`qsopt_last_error`] on the same thread. Strings handed
//! out by the library are owned by the caller and released with
//! [`qsopt_string_free`]. Points and configurations cross the boundary as
//! JSON text.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qsopt::learner::{Campaign, CampaignConfig};
use qsopt::qscore::QSPoint;
use qsopt::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsoptStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    Json = 3,
    Io = 4,
    NotFitted = 5,
    Stopped = 6,
    Numerical = 7,
    Oracle = 8,
    Panic = 99,
}

/// Opaque campaign handle.
pub struct QsoptCampaign {
    inner: Campaign,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QsoptStatus {
    match e {
        Error::Invalid(_) | Error::Csv(_) => QsoptStatus::InvalidInput,
        Error::Json(_) => QsoptStatus::Json,
        Error::Io(_) | Error::Checksum(_) => QsoptStatus::Io,
        Error::NotFitted => QsoptStatus::NotFitted,
        Error::Stopped(_) => QsoptStatus::Stopped,
        Error::Oracle(_) => QsoptStatus::Oracle,
        Error::IllConditioned(_) | Error::Fit(_) | Error::GradientUndefined | Error::SingularUpdate(_) => QsoptStatus::Numerical,
    }
}

struct Fail(QsoptStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QsoptStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QsoptStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_default()));
            QsoptStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(QsoptStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(QsoptStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *mut QsoptCampaign) -> Result<&'a mut QsoptCampaign, Fail> {
    h.as_mut().ok_or_else(|| Fail(QsoptStatus::NullArgument, "campaign handle is null".into()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(QsoptStatus::NullArgument, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|e| Fail(QsoptStatus::InvalidInput, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail(QsoptStatus::Json, e.to_string()))
}

unsafe fn put_handle(out: *mut *mut QsoptCampaign, c: Campaign) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(QsoptStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(QsoptCampaign { inner: c }));
    Ok(())
}

/// Library version, a static string that must not be freed.
#[no_mangle]
pub extern "C" fn qsopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the failure of the latest status-returning call on this
/// thread, or NULL if it succeeded. Valid until the next such call.
#[no_mangle]
pub extern "C" fn qsopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn qsopt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a campaign from a JSON configuration.
///
/// # Safety
/// `id` and `config_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_new(id: *const c_char, config_json: *const c_char, out: *mut *mut QsoptCampaign) -> QsoptStatus {
    guard(|| {
        let id = text(id, "id")?;
        let config: CampaignConfig = serde_json::from_str(text(config_json, "config_json")?).map_err(Error::from)?;
        put_handle(out, Campaign::new(id, config)?)
    })
}

/// Default configuration for a builtin oracle, as JSON.
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_default_config(
    name: *const c_char,
    design_size: usize,
    max_runs: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> QsoptStatus {
    guard(|| {
        let oracle = qsopt::oracles::builtin(text(name, "name")?)?;
        put_string(out, json(&CampaignConfig::for_oracle(oracle.as_ref(), design_size, max_runs, seed))?)
    })
}

/// Loads a campaign file and keeps saving to it after every change.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_load(path: *const c_char, out: *mut *mut QsoptCampaign) -> QsoptStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        let mut c = Campaign::load(path)?;
        c.attach(path)?;
        put_handle(out, c)
    })
}

/// Saves now and after every later change.
///
/// # Safety
/// `h` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_attach(h: *mut QsoptCampaign, path: *const c_char) -> QsoptStatus {
    guard(|| {
        let h = handle(h)?;
        h.inner.attach(text(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `h` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_free(h: *mut QsoptCampaign) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Next run as JSON; repeated calls return the same run until an observation.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_suggest(h: *mut QsoptCampaign, out: *mut *mut c_char) -> QsoptStatus {
    guard(|| {
        let h = handle(h)?;
        let s = h.inner.suggest()?;
        put_string(out, json(&s)?)
    })
}

/// Records a response. `point_json` is `{"x": [...], "o": [...]}` on the raw
/// scale; `nonce` may be NULL. `appended` (nullable) receives 0 when the
/// nonce was already recorded.
///
/// # Safety
/// `h` must be a live handle; strings NUL-terminated or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_observe(
    h: *mut QsoptCampaign,
    point_json: *const c_char,
    y: f64,
    nonce: *const c_char,
    manual: bool,
    appended: *mut bool,
) -> QsoptStatus {
    guard(|| {
        let h = handle(h)?;
        let point: QSPoint = serde_json::from_str(text(point_json, "point_json")?).map_err(Error::from)?;
        let nonce = if nonce.is_null() { None } else { Some(text(nonce, "nonce")?) };
        let added = h.inner.observe(&point, y, nonce, manual)?;
        if let Some(a) = appended.as_mut() {
            *a = added;
        }
        Ok(())
    })
}

/// 1 while the campaign accepts runs, 0 once stopped, -1 for NULL.
///
/// # Safety
/// `h` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_is_active(h: *const QsoptCampaign) -> i32 {
    match h.as_ref() {
        Some(h) => h.inner.is_active() as i32,
        None => -1,
    }
}

/// Number of recorded runs.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_runs(h: *const QsoptCampaign, out: *mut usize) -> QsoptStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| Fail(QsoptStatus::NullArgument, "campaign handle is null".into()))?;
        let out = out.as_mut().ok_or_else(|| Fail(QsoptStatus::NullArgument, "output pointer is null".into()))?;
        *out = h.inner.n();
        Ok(())
    })
}

/// Full campaign state as JSON.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_to_json(h: *mut QsoptCampaign, out: *mut *mut c_char) -> QsoptStatus {
    guard(|| {
        let h = handle(h)?;
        put_string(out, h.inner.to_json()?)
    })
}

/// Hyperparameters and latent order-position coordinates as JSON.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_campaign_model(h: *mut QsoptCampaign, out: *mut *mut c_char) -> QsoptStatus {
    guard(|| {
        let h = handle(h)?;
        let m = h.inner.model_summary()?;
        put_string(out, json(&m)?)
    })
}

/// Evaluates a builtin oracle at a raw-scale point.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsopt_oracle_evaluate(name: *const c_char, point_json: *const c_char, out: *mut f64) -> QsoptStatus {
    guard(|| {
        let oracle = qsopt::oracles::builtin(text(name, "name")?)?;
        let point: QSPoint = serde_json::from_str(text(point_json, "point_json")?).map_err(Error::from)?;
        let out = out.as_mut().ok_or_else(|| Fail(QsoptStatus::NullArgument, "output pointer is null".into()))?;
        *out = oracle.evaluate(&point)?;
        Ok(())
    })
}
