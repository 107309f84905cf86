//! C ABI for the hmflow pipeline.
//!
//! Usage pattern: `hmf_run_new` parses and validates a JSON configuration and
//! returns an opaque run handle, `hmf_run_execute` runs the pipeline (planar
//! stage, initial map, hyperbolic flow), and the accessors read results out.
//! Every fallible function returns a status code; on failure a thread-local
//! message is retrievable with `hmf_last_error_message`.
//!
//! Status codes match the CLI exit codes: 0 success, 2 invalid input,
//! 3 step budget exhausted before convergence, 4 numerical failure.

use hmflow::config::RunConfig;
use hmflow::error::Error;
use hmflow::pipeline::{prepare, run_diagnostics, run_pipeline, PipelineOutput, Prepared};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

pub const HMF_OK: i32 = 0;
pub const HMF_ERR_INVALID: i32 = 2;
pub const HMF_ERR_NOT_CONVERGED: i32 = 3;
pub const HMF_ERR_NUMERICAL: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> i32 {
    set_error(&e.to_string());
    e.exit_code()
}

fn invalid(msg: &str) -> i32 {
    set_error(msg);
    HMF_ERR_INVALID
}

/// Opaque run handle: a validated configuration plus, after
/// `hmf_run_execute`, the pipeline output.
pub struct HmfRun {
    prep: Prepared,
    output: Option<PipelineOutput>,
}

/// Parse and validate a JSON run configuration; on success `*out` receives a
/// handle that must be released with `hmf_run_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated UTF-8 string and `out` a valid
/// pointer; both must stay valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_new(config_json: *const c_char, out: *mut *mut HmfRun) -> i32 {
    if config_json.is_null() || out.is_null() {
        return invalid("hmf_run_new: null argument");
    }
    let s = match CStr::from_ptr(config_json).to_str() {
        Ok(s) => s,
        Err(_) => return invalid("hmf_run_new: config is not valid UTF-8"),
    };
    let cfg = match RunConfig::from_json(s) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match prepare(&cfg) {
        Ok(prep) => {
            *out = Box::into_raw(Box::new(HmfRun { prep, output: None }));
            HMF_OK
        }
        Err(e) => fail(&e),
    }
}

/// Run the pipeline to completion. Returns 0 when the flow reached the
/// configured tension tolerance and 3 when the step budget ran out first (the
/// partial result is still readable through the accessors).
///
/// # Safety
/// `run` must be a live handle from `hmf_run_new`.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_execute(run: *mut HmfRun) -> i32 {
    let Some(r) = run.as_mut() else {
        return invalid("hmf_run_execute: null handle");
    };
    match run_pipeline(&r.prep, None, None) {
        Ok(out) => {
            let converged = out.result.converged;
            r.output = Some(out);
            if converged {
                HMF_OK
            } else {
                set_error("step budget exhausted before convergence");
                HMF_ERR_NOT_CONVERGED
            }
        }
        Err(e) => fail(&e),
    }
}

/// The 16-hex-digit configuration hash stamped into every artifact, as a
/// newly allocated string (free with `hmf_string_free`); NULL on null handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_config_hash(run: *const HmfRun) -> *mut c_char {
    match run.as_ref() {
        Some(r) => CString::new(r.prep.hash.clone())
            .map_or(std::ptr::null_mut(), CString::into_raw),
        None => std::ptr::null_mut(),
    }
}

macro_rules! result_accessor {
    ($(#[$doc:meta])* $name:ident, $ty:ty, $get:expr) => {
        $(#[$doc])*
        /// Fails with code 2 if the handle is null or not yet executed.
        ///
        /// # Safety
        /// `run` must be a live handle and `out` a valid pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $name(run: *const HmfRun, out: *mut $ty) -> i32 {
            let Some(r) = run.as_ref() else {
                return invalid(concat!(stringify!($name), ": null handle"));
            };
            if out.is_null() {
                return invalid(concat!(stringify!($name), ": null output pointer"));
            }
            let Some(o) = r.output.as_ref() else {
                return invalid(concat!(stringify!($name), ": call hmf_run_execute first"));
            };
            #[allow(clippy::redundant_closure_call)]
            {
                *out = ($get)(o);
            }
            HMF_OK
        }
    };
}

result_accessor!(
    /// Whether the flow reached the configured tension tolerance.
    hmf_run_converged, bool, |o: &PipelineOutput| o.result.converged);
result_accessor!(
    /// Total number of flow steps taken.
    hmf_run_final_step, u64, |o: &PipelineOutput| o.final_step() as u64);
result_accessor!(
    /// Total flow time reached.
    hmf_run_final_time, f64, |o: &PipelineOutput| o.final_t());
result_accessor!(
    /// Final sup of the pointwise tension norm.
    hmf_run_sup_tension, f64, |o: &PipelineOutput| o.result.sup_tau);

/// Number of grid nodes in the discrete map (0 for a null handle).
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_node_count(run: *const HmfRun) -> usize {
    run.as_ref().map_or(0, |r| r.prep.grid.nx * r.prep.grid.ny)
}

/// Copy the final surface into `buf` as x,y,z triples in upper-half-space
/// coordinates; `len` must be at least 3 × `hmf_run_node_count`.
///
/// # Safety
/// `run` must be a live, executed handle and `buf` must point to at least
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_surface(run: *const HmfRun, buf: *mut f64, len: usize) -> i32 {
    let Some(r) = run.as_ref() else {
        return invalid("hmf_run_surface: null handle");
    };
    let Some(o) = r.output.as_ref() else {
        return invalid("hmf_run_surface: call hmf_run_execute first");
    };
    let need = 3 * o.result.map.values.len();
    if buf.is_null() || len < need {
        return invalid("hmf_run_surface: buffer too small");
    }
    let out = std::slice::from_raw_parts_mut(buf, need);
    for (i, p) in o.result.map.values.iter().enumerate() {
        out[3 * i] = p.x;
        out[3 * i + 1] = p.y;
        out[3 * i + 2] = p.z;
    }
    HMF_OK
}

/// Run the configured diagnostics on the final state and return the report as
/// a newly allocated JSON string in `*out` (free with `hmf_string_free`).
///
/// # Safety
/// `run` must be a live, executed handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_report_json(run: *const HmfRun, out: *mut *mut c_char) -> i32 {
    let Some(r) = run.as_ref() else {
        return invalid("hmf_run_report_json: null handle");
    };
    if out.is_null() {
        return invalid("hmf_run_report_json: null output pointer");
    }
    let Some(o) = r.output.as_ref() else {
        return invalid("hmf_run_report_json: call hmf_run_execute first");
    };
    let diag = match run_diagnostics(
        &r.prep,
        &o.result.map,
        Some(&o.planar.map),
        o.final_step(),
        o.final_t(),
    ) {
        Ok(d) => d,
        Err(e) => return fail(&e),
    };
    let json = match serde_json::to_string_pretty(&diag.report) {
        Ok(j) => j,
        Err(e) => return invalid(&format!("serialize report: {e}")),
    };
    match CString::new(json) {
        Ok(c) => {
            *out = c.into_raw();
            HMF_OK
        }
        Err(_) => invalid("report contained a NUL byte"),
    }
}

/// The message for the most recent failure on this thread, as a newly
/// allocated string (free with `hmf_string_free`); NULL if none.
#[no_mangle]
pub extern "C" fn hmf_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null_mut(), |c| c.clone().into_raw())
    })
}

/// Free a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must have been returned by a function of this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn hmf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a run handle. NULL is ignored.
///
/// # Safety
/// `run` must have been returned by `hmf_run_new` and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hmf_run_free(run: *mut HmfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_cstring() -> CString {
        // A planar quadrilateral: the flow converges at the initial map.
        CString::new(
            r#"{
                "polygon": { "params": [[0.5, 0.0]] },
                "q": "auto",
                "grid": { "radius": 12.0, "n": 17 },
                "flow": { "max_steps": 100, "checkpoint_every": 50, "series_every": 25 },
                "out_dir": "unused"
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn c_api_roundtrip() {
        unsafe {
            let cfg = cfg_cstring();
            let mut run: *mut HmfRun = std::ptr::null_mut();
            assert_eq!(hmf_run_new(cfg.as_ptr(), &mut run), HMF_OK);
            assert!(!run.is_null());

            let n = hmf_run_node_count(run);
            assert_eq!(n, 17 * 17);

            // Accessors before execute report invalid use.
            let mut steps = 0u64;
            assert_eq!(hmf_run_final_step(run, &mut steps), HMF_ERR_INVALID);
            let msg = hmf_last_error_message();
            assert!(!msg.is_null());
            hmf_string_free(msg);

            assert_eq!(hmf_run_execute(run), HMF_OK);
            let mut conv = false;
            assert_eq!(hmf_run_converged(run, &mut conv), HMF_OK);
            assert!(conv);
            let mut sup = f64::NAN;
            assert_eq!(hmf_run_sup_tension(run, &mut sup), HMF_OK);
            assert!(sup.is_finite());

            let hash = hmf_run_config_hash(run);
            assert!(!hash.is_null());
            assert_eq!(CStr::from_ptr(hash).to_str().unwrap().len(), 16);

            let mut buf = vec![0.0f64; 3 * n];
            assert_eq!(hmf_run_surface(run, buf.as_mut_ptr(), buf.len()), HMF_OK);
            assert!(buf.iter().step_by(3).skip(2).any(|_| true));
            assert!(buf.chunks(3).all(|p| p[2] > 0.0), "heights stay positive");
            assert_eq!(
                hmf_run_surface(run, buf.as_mut_ptr(), 3 * n - 1),
                HMF_ERR_INVALID
            );

            let mut report: *mut c_char = std::ptr::null_mut();
            assert_eq!(hmf_run_report_json(run, &mut report), HMF_OK);
            let text = CStr::from_ptr(report).to_str().unwrap();
            let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
            assert_eq!(
                parsed["config_hash"].as_str().unwrap(),
                CStr::from_ptr(hash).to_str().unwrap()
            );
            hmf_string_free(report);
            hmf_string_free(hash);
            hmf_run_free(run);
        }
    }

    #[test]
    fn bad_config_is_rejected_with_message() {
        unsafe {
            let cfg = CString::new("{ not json").unwrap();
            let mut run: *mut HmfRun = std::ptr::null_mut();
            assert_eq!(hmf_run_new(cfg.as_ptr(), &mut run), HMF_ERR_INVALID);
            assert!(run.is_null());
            let msg = hmf_last_error_message();
            assert!(!msg.is_null());
            assert!(CStr::from_ptr(msg).to_str().unwrap().contains("config"));
            hmf_string_free(msg);
        }
    }
}
