//! C interface to the lab engine.
//!
//! A lab is an opaque `LlLab` handle opened from a TOML config file. Every
//! call returns an [`LlStatus`]; on failure the message is available from
//! [`ll_last_error`] on the same thread. Strings handed out by the library
//! are NUL-terminated UTF-8 and must be released with [`ll_string_free`].
//! A handle may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use livinglab::config::LabConfig;
use livinglab::evaluation::sign_test;
use livinglab::lab::{ExperimentDraft, Lab, LabError, LabOptions, SessionSubject};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Conflict = 4,
    Unavailable = 5,
    Io = 6,
    Internal = 7,
}

/// Opaque lab handle.
pub struct LlLab {
    lab: Lab,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(LlStatus, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let status = match e {
            LabError::NotFound(_) => LlStatus::NotFound,
            LabError::Conflict(_) => LlStatus::Conflict,
            LabError::BadRequest(_) => LlStatus::InvalidArgument,
            LabError::Unavailable(_) => LlStatus::Unavailable,
            LabError::Storage(_) | LabError::Corrupt(_) => LlStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl ToString) -> Failure {
    Failure(LlStatus::InvalidArgument, message.to_string())
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn run(body: impl FnOnce() -> Result<(), Failure>) -> LlStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body))
        .unwrap_or_else(|_| Err(Failure(LlStatus::Internal, "internal panic".into())));
    match outcome {
        Ok(()) => {
            set_last_error("");
            LlStatus::Ok
        }
        Err(Failure(status, message)) => {
            set_last_error(&message);
            status
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure(LlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn optional_text<'a>(ptr: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if ptr.is_null() {
        Ok(None)
    } else {
        text(ptr, what).map(Some)
    }
}

unsafe fn handle<'a>(lab: *const LlLab) -> Result<&'a Lab, Failure> {
    lab.as_ref()
        .map(|h| &h.lab)
        .ok_or_else(|| Failure(LlStatus::NullPointer, "lab handle is null".into()))
}

unsafe fn hand_out(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    let value = CString::new(value).map_err(|_| Failure(LlStatus::Internal, "interior NUL".into()))?;
    *out = value.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(LlStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Open the lab described by a config file. Its data directory is created
/// if missing and the event log is replayed.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ll_lab_open(config_path: *const c_char, out: *mut *mut LlLab) -> LlStatus {
    run(|| {
        check_out(out)?;
        let path = text(config_path, "config_path")?;
        let config = LabConfig::load(Path::new(path)).map_err(invalid)?;
        let sites = config.load_sites(None).map_err(invalid)?;
        let options = LabOptions {
            snapshot_every: config.snapshot_every,
            ..LabOptions::default()
        };
        let lab = Lab::open(&config.data_dir, sites, config.system_descriptors(), options)?;
        *out = Box::into_raw(Box::new(LlLab { lab }));
        Ok(())
    })
}

/// Write a snapshot and release the handle. Null is ignored.
///
/// # Safety
/// `lab` must come from [`ll_lab_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ll_lab_free(lab: *mut LlLab) {
    if !lab.is_null() {
        let lab = Box::from_raw(lab);
        let _ = catch_unwind(AssertUnwindSafe(|| lab.lab.snapshot()));
    }
}

/// Create an experiment from its JSON definition; its id is written to
/// `experiment_id`.
///
/// # Safety
/// Pointers must be valid; `experiment_id` receives a string owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn ll_experiment_create(
    lab: *const LlLab,
    definition_json: *const c_char,
    experiment_id: *mut *mut c_char,
) -> LlStatus {
    run(|| {
        check_out(experiment_id)?;
        let lab = handle(lab)?;
        let draft: ExperimentDraft =
            serde_json::from_str(text(definition_json, "definition_json")?).map_err(invalid)?;
        let id = lab.create_experiment(draft)?;
        hand_out(experiment_id, id)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ll_experiment_start(lab: *const LlLab, experiment_id: *const c_char) -> LlStatus {
    run(|| {
        handle(lab)?.start_experiment(text(experiment_id, "experiment_id")?)?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ll_experiment_stop(lab: *const LlLab, experiment_id: *const c_char) -> LlStatus {
    run(|| {
        handle(lab)?.stop_experiment(text(experiment_id, "experiment_id")?)?;
        Ok(())
    })
}

/// Open a session for a query (ad-hoc retrieval) or a seed record (dataset
/// recommendation); exactly one of the two must be non-null. Writes
/// `{"session_id":…,"docs":[…]}` to `session_json`.
///
/// # Safety
/// Pointers must be valid or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn ll_session_create(
    lab: *const LlLab,
    experiment_id: *const c_char,
    query_id: *const c_char,
    seed_record: *const c_char,
    session_json: *mut *mut c_char,
) -> LlStatus {
    run(|| {
        check_out(session_json)?;
        let lab = handle(lab)?;
        let experiment_id = text(experiment_id, "experiment_id")?;
        let subject = match (optional_text(query_id, "query_id")?, optional_text(seed_record, "seed_record")?) {
            (Some(q), None) => SessionSubject::QueryId(q.to_owned()),
            (None, Some(s)) => SessionSubject::SeedRecord(s.to_owned()),
            _ => return Err(invalid("give exactly one of query_id and seed_record")),
        };
        let created = lab.create_session(experiment_id, subject)?;
        let body = serde_json::to_string(&created).map_err(|e| Failure(LlStatus::Internal, e.to_string()))?;
        hand_out(session_json, body)
    })
}

/// Record the clicked 0-based ranks of a session. `clicks` may be null when
/// `len` is 0.
///
/// # Safety
/// `clicks` must point at `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn ll_session_feedback(
    lab: *const LlLab,
    session_id: *const c_char,
    clicks: *const usize,
    len: usize,
) -> LlStatus {
    run(|| {
        let lab = handle(lab)?;
        let session_id = text(session_id, "session_id")?;
        let clicks: &[usize] = if len == 0 {
            &[]
        } else if clicks.is_null() {
            return Err(Failure(LlStatus::NullPointer, "clicks is null".into()));
        } else {
            std::slice::from_raw_parts(clicks, len)
        };
        lab.record_feedback(session_id, clicks)?;
        Ok(())
    })
}

/// Write the experiment report as JSON to `report_json`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ll_report_json(
    lab: *const LlLab,
    experiment_id: *const c_char,
    report_json: *mut *mut c_char,
) -> LlStatus {
    run(|| {
        check_out(report_json)?;
        let report = handle(lab)?.report(text(experiment_id, "experiment_id")?)?;
        let body = serde_json::to_string(&report).map_err(|e| Failure(LlStatus::Internal, e.to_string()))?;
        hand_out(report_json, body)
    })
}

/// Two-sided exact sign test. `defined` is set to 0 when there are no
/// decided sessions, and `p_value` is then left untouched.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ll_sign_test(wins: u64, losses: u64, p_value: *mut f64, defined: *mut bool) -> LlStatus {
    run(|| {
        check_out(p_value)?;
        check_out(defined)?;
        match sign_test(wins, losses) {
            Some(p) => {
                *p_value = p;
                *defined = true;
            }
            None => *defined = false,
        }
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ll_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ll_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

#[cfg(test)]
mod tests {
    use std::ptr;

    use super::*;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(ll_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn sign_test_matches_direct_call() {
        let mut p = -1.0;
        let mut defined = false;
        assert_eq!(unsafe { ll_sign_test(8, 2, &mut p, &mut defined) }, LlStatus::Ok);
        assert!(defined);
        assert_eq!(p, 0.109375);
        assert_eq!(unsafe { ll_sign_test(0, 0, &mut p, &mut defined) }, LlStatus::Ok);
        assert!(!defined);
        assert_eq!(p, 0.109375);
    }

    #[test]
    fn null_pointers_are_reported() {
        let status = unsafe { ll_sign_test(1, 1, ptr::null_mut(), ptr::null_mut()) };
        assert_eq!(status, LlStatus::NullPointer);
        assert!(last_error().contains("null"));
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { ll_lab_open(ptr::null(), &mut out) }, LlStatus::NullPointer);
        assert!(out.is_null());
        assert_eq!(
            unsafe { ll_experiment_start(ptr::null(), c"exp-0001".as_ptr()) },
            LlStatus::NullPointer
        );
    }

    #[test]
    fn missing_config_is_invalid() {
        let mut out = ptr::null_mut();
        let status = unsafe { ll_lab_open(c"/nonexistent/lab.toml".as_ptr(), &mut out) };
        assert_eq!(status, LlStatus::InvalidArgument);
        assert!(last_error().contains("lab.toml"));
    }

    #[test]
    fn error_mapping() {
        assert_eq!(Failure::from(LabError::NotFound("x".into())).0, LlStatus::NotFound);
        assert_eq!(Failure::from(LabError::Corrupt("x".into())).0, LlStatus::Io);
        assert_eq!(Failure::from(LabError::Unavailable("x".into())).0, LlStatus::Unavailable);
    }

    #[test]
    fn success_clears_last_error() {
        unsafe {
            ll_sign_test(1, 1, ptr::null_mut(), ptr::null_mut());
            let (mut p, mut d) = (0.0, false);
            ll_sign_test(1, 1, &mut p, &mut d);
        }
        assert_eq!(last_error(), "");
    }

    #[test]
    fn freeing_null_is_harmless() {
        unsafe {
            ll_string_free(ptr::null_mut());
            ll_lab_free(ptr::null_mut());
        }
    }
}
