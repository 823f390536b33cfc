//! C ABI for the markovflow library.
//!
//! Conventions:
//!
//! * Every fallible call returns an [`MfStatus`]; `MF_STATUS_OK` is 0.
//!   On any other status, [`mf_last_error_message`] returns a detailed
//!   message (thread-local, valid until the next failing call on the same
//!   thread).
//! * Scenarios and reports are opaque handles created and destroyed by this
//!   library; strings returned from a handle stay owned by the handle and
//!   live until the handle is freed.
//! * Matrices cross the boundary as row-major `double` buffers of length
//!   `dim·dim`, parameter vectors as `double` buffers of length `dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use markovflow::algebra::{EqualInputGenerator, EqualInputMatrix, ParamVector};
use markovflow::scenario::{self, RunReport, Scenario};
use markovflow::Error;

/// Status codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    SchemaError = 3,
    InvalidFamily = 4,
    NotCommuting = 5,
    PoleProximity = 6,
    QuadratureNotConverged = 7,
    SeriesNotConverged = 8,
    SummatoryOutOfRange = 9,
    NonpositiveSpectrum = 10,
    StepUnderflow = 11,
    IllConditioned = 12,
    DimensionMismatch = 13,
    NonFiniteInput = 14,
    EigenvaluesNotConverged = 15,
    Io = 16,
    ChecksFailed = 17,
    Internal = 18,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> MfStatus {
    match err {
        Error::DimensionMismatch { .. } => MfStatus::DimensionMismatch,
        Error::NonFiniteInput(_) => MfStatus::NonFiniteInput,
        Error::BernoulliOrderTooLarge(_) => MfStatus::SchemaError,
        Error::PoleProximity { .. } => MfStatus::PoleProximity,
        Error::IllConditionedNoFallback { .. } => MfStatus::IllConditioned,
        Error::QuadratureNotConverged { .. } => MfStatus::QuadratureNotConverged,
        Error::SeriesNotConverged { .. } => MfStatus::SeriesNotConverged,
        Error::XGeOne { .. } => MfStatus::SummatoryOutOfRange,
        Error::InvalidFamily(_) => MfStatus::InvalidFamily,
        Error::InvalidGrid(_) => MfStatus::SchemaError,
        Error::NotCommuting { .. } => MfStatus::NotCommuting,
        Error::StepUnderflow { .. } => MfStatus::StepUnderflow,
        Error::NonpositiveSpectrum { .. } => MfStatus::NonpositiveSpectrum,
        Error::EigenvaluesNotConverged => MfStatus::EigenvaluesNotConverged,
        Error::SchemaError { .. } => MfStatus::SchemaError,
        Error::WithContext { source, .. } => status_of(source),
        Error::Io(_) => MfStatus::Io,
    }
}

fn fail(err: &Error) -> MfStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Opaque parsed scenario.
pub struct MfScenario {
    inner: Scenario,
}

/// Opaque run report with lazily rendered, handle-owned strings.
pub struct MfReport {
    inner: RunReport,
    csv: OnceLock<CString>,
    json: OnceLock<CString>,
    summary: OnceLock<CString>,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(env!("CARGO_PKG_VERSION")).unwrap())
        .as_ptr()
}

/// Message of the last failure on this thread. Never null; empty before the
/// first failure. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses and validates a scenario JSON document into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_scenario_parse(
    json: *const c_char,
    out: *mut *mut MfScenario,
) -> MfStatus {
    if json.is_null() || out.is_null() {
        set_error("null argument");
        return MfStatus::NullArgument;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(e) => {
            set_error(&format!("scenario text is not UTF-8: {e}"));
            return MfStatus::InvalidUtf8;
        }
    };
    match scenario::parse_scenario(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(MfScenario { inner }));
            MfStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Frees a scenario handle. Accepts null.
///
/// # Safety
/// `scenario` must be null or a pointer returned by [`mf_scenario_parse`].
#[no_mangle]
pub unsafe extern "C" fn mf_scenario_free(scenario: *mut MfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Grid size of a parsed scenario (0 on null input).
///
/// # Safety
/// `scenario` must be null or a valid scenario handle.
#[no_mangle]
pub unsafe extern "C" fn mf_scenario_grid_points(scenario: *const MfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.grid_points)
}

/// Runs all checks of a scenario and returns an opaque report handle.
///
/// # Safety
/// `scenario` must be a valid scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_scenario_run(
    scenario: *const MfScenario,
    out: *mut *mut MfReport,
) -> MfStatus {
    let Some(handle) = scenario.as_ref() else {
        set_error("null scenario handle");
        return MfStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null output pointer");
        return MfStatus::NullArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| scenario::run(&handle.inner)));
    match result {
        Ok(Ok(report)) => {
            *out = Box::into_raw(Box::new(MfReport {
                inner: report,
                csv: OnceLock::new(),
                json: OnceLock::new(),
                summary: OnceLock::new(),
            }));
            MfStatus::Ok
        }
        Ok(Err(e)) => fail(&e),
        Err(_) => {
            set_error("internal panic while running the scenario");
            MfStatus::Internal
        }
    }
}

/// Frees a report handle and all strings it owns. Accepts null.
///
/// # Safety
/// `report` must be null or a pointer returned by [`mf_scenario_run`].
#[no_mangle]
pub unsafe extern "C" fn mf_report_free(report: *mut MfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Whether every requested check passed.
///
/// # Safety
/// `report` must be null or a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn mf_report_passed(report: *const MfReport) -> bool {
    report.as_ref().is_some_and(|r| r.inner.passed)
}

/// The CSV report; owned by the handle.
///
/// # Safety
/// `report` must be a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn mf_report_csv(report: *const MfReport) -> *const c_char {
    let Some(handle) = report.as_ref() else {
        return std::ptr::null();
    };
    handle
        .csv
        .get_or_init(|| CString::new(handle.inner.to_csv()).unwrap_or_default())
        .as_ptr()
}

/// The JSON report; owned by the handle.
///
/// # Safety
/// `report` must be a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn mf_report_json(report: *const MfReport) -> *const c_char {
    let Some(handle) = report.as_ref() else {
        return std::ptr::null();
    };
    handle
        .json
        .get_or_init(|| {
            CString::new(handle.inner.to_json_pretty().unwrap_or_default()).unwrap_or_default()
        })
        .as_ptr()
}

/// The per-check verdict summary, one line per check; owned by the handle.
///
/// # Safety
/// `report` must be a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn mf_report_summary(report: *const MfReport) -> *const c_char {
    let Some(handle) = report.as_ref() else {
        return std::ptr::null();
    };
    handle
        .summary
        .get_or_init(|| CString::new(handle.inner.verify_lines()).unwrap_or_default())
        .as_ptr()
}

unsafe fn params_from_raw(dim: usize, data: *const f64) -> Result<ParamVector, MfStatus> {
    if data.is_null() {
        set_error("null parameter buffer");
        return Err(MfStatus::NullArgument);
    }
    let slice = std::slice::from_raw_parts(data, dim);
    ParamVector::new(slice.to_vec()).map_err(|e| fail(&e))
}

/// `exp(t·Q_x)` for the equal-input generator with the given parameter
/// vector; writes the dense result row-major into `out_matrix`
/// (`dim·dim` doubles).
///
/// # Safety
/// `params` must point to `dim` doubles and `out_matrix` to `dim·dim`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_ei_exp(
    dim: usize,
    params: *const f64,
    t: f64,
    out_matrix: *mut f64,
) -> MfStatus {
    if out_matrix.is_null() {
        set_error("null output buffer");
        return MfStatus::NullArgument;
    }
    let p = match params_from_raw(dim, params) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let m = markovflow::flows::ei_exp(&EqualInputGenerator::new(p), t);
    let dense = markovflow::dense::to_row_major(&m.densify());
    std::ptr::copy_nonoverlapping(dense.as_ptr(), out_matrix, dim * dim);
    MfStatus::Ok
}

/// The equal-input BCH logarithm `log(exp(Q_x)·exp(Q_y))`; writes the
/// resulting parameter vector into `out_params` (`dim` doubles).
///
/// # Safety
/// `x` and `y` must point to `dim` doubles and `out_params` to `dim`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_bch_log(
    dim: usize,
    x: *const f64,
    y: *const f64,
    out_params: *mut f64,
) -> MfStatus {
    if out_params.is_null() {
        set_error("null output buffer");
        return MfStatus::NullArgument;
    }
    let (px, py) = match (params_from_raw(dim, x), params_from_raw(dim, y)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match markovflow::flows::bch_log(&EqualInputGenerator::new(px), &EqualInputGenerator::new(py)) {
        Ok(log) => {
            std::ptr::copy_nonoverlapping(log.params.entries().as_ptr(), out_params, dim);
            MfStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Principal equal-input logarithm of `M_x` given its parameter vector;
/// writes the generator parameters and the homogeneous-embeddability
/// verdict.
///
/// # Safety
/// `params` must point to `dim` doubles, `out_params` to `dim` writable
/// doubles, and `out_embeddable` to a writable bool.
#[no_mangle]
pub unsafe extern "C" fn mf_ei_principal_log(
    dim: usize,
    params: *const f64,
    out_params: *mut f64,
    out_embeddable: *mut bool,
) -> MfStatus {
    if out_params.is_null() || out_embeddable.is_null() {
        set_error("null output buffer");
        return MfStatus::NullArgument;
    }
    let p = match params_from_raw(dim, params) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match markovflow::flows::ei_principal_log(&EqualInputMatrix::new(p)) {
        Ok((r, embeddable)) => {
            std::ptr::copy_nonoverlapping(r.params.entries().as_ptr(), out_params, dim);
            *out_embeddable = embeddable;
            MfStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn version_is_nonempty() {
        let v = unsafe { CStr::from_ptr(mf_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn scenario_round_trip_through_the_abi() {
        let text = cstr(
            r#"{
                "name": "capi",
                "dim": 2,
                "grid_points": 3,
                "family": {"kind": "equal_input", "q": [
                    {"kind": "constant", "c": 0.2},
                    {"kind": "constant", "c": 0.1}
                ]},
                "checks": ["ORACLE_RK", "STRUCTURE"]
            }"#,
        );
        let mut scenario: *mut MfScenario = std::ptr::null_mut();
        let status = unsafe { mf_scenario_parse(text.as_ptr(), &mut scenario) };
        assert_eq!(status, MfStatus::Ok);
        assert_eq!(unsafe { mf_scenario_grid_points(scenario) }, 3);

        let mut report: *mut MfReport = std::ptr::null_mut();
        let status = unsafe { mf_scenario_run(scenario, &mut report) };
        assert_eq!(status, MfStatus::Ok);
        assert!(unsafe { mf_report_passed(report) });
        let csv = unsafe { CStr::from_ptr(mf_report_csv(report)) };
        assert!(csv.to_str().unwrap().starts_with("t,m_0_0"));
        let json = unsafe { CStr::from_ptr(mf_report_json(report)) };
        assert!(json.to_str().unwrap().contains("\"passed\": true"));
        let summary = unsafe { CStr::from_ptr(mf_report_summary(report)) };
        assert!(summary.to_str().unwrap().contains("verdict: PASS"));

        unsafe {
            mf_report_free(report);
            mf_scenario_free(scenario);
        }
    }

    #[test]
    fn schema_errors_surface_with_message() {
        let text = cstr(r#"{"name": "bad", "dim": 1, "family": {"kind": "equal_input", "q": []}}"#);
        let mut scenario: *mut MfScenario = std::ptr::null_mut();
        let status = unsafe { mf_scenario_parse(text.as_ptr(), &mut scenario) };
        assert_eq!(status, MfStatus::SchemaError);
        let msg = unsafe { CStr::from_ptr(mf_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("dim"));
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status = unsafe { mf_scenario_parse(std::ptr::null(), std::ptr::null_mut()) };
        assert_eq!(status, MfStatus::NullArgument);
        unsafe {
            mf_scenario_free(std::ptr::null_mut());
            mf_report_free(std::ptr::null_mut());
        }
        assert!(!unsafe { mf_report_passed(std::ptr::null()) });
    }

    #[test]
    fn value_level_helpers_match_the_library() {
        let params = [1.0, 1.0];
        let mut out = [0.0; 4];
        let status =
            unsafe { mf_ei_exp(2, params.as_ptr(), std::f64::consts::LN_2, out.as_mut_ptr()) };
        assert_eq!(status, MfStatus::Ok);
        assert!((out[0] - 0.625).abs() < 1e-15);
        assert!((out[1] - 0.375).abs() < 1e-15);

        let x = [0.3, 0.2];
        let y = [0.1, 0.4];
        let mut bch = [0.0; 2];
        let status = unsafe { mf_bch_log(2, x.as_ptr(), y.as_ptr(), bch.as_mut_ptr()) };
        assert_eq!(status, MfStatus::Ok);
        let expected = markovflow::flows::bch_log(
            &EqualInputGenerator::new(ParamVector::new(x.to_vec()).unwrap()),
            &EqualInputGenerator::new(ParamVector::new(y.to_vec()).unwrap()),
        )
        .unwrap();
        for (a, b) in bch.iter().zip(expected.params.entries()) {
            assert!((a - b).abs() < 1e-15);
        }

        let m = [0.2, 0.1];
        let mut r = [0.0; 2];
        let mut embeddable = false;
        let status = unsafe { mf_ei_principal_log(2, m.as_ptr(), r.as_mut_ptr(), &mut embeddable) };
        assert_eq!(status, MfStatus::Ok);
        assert!(embeddable);

        // x ≥ 1 is refused with the dedicated status
        let singular = [0.6, 0.6];
        let status =
            unsafe { mf_ei_principal_log(2, singular.as_ptr(), r.as_mut_ptr(), &mut embeddable) };
        assert_eq!(status, MfStatus::SummatoryOutOfRange);
    }

    #[test]
    fn generated_header_exists_and_names_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/markovflow.h");
        let text = std::fs::read_to_string(header).expect("cbindgen header");
        for needle in [
            "MfStatus",
            "mf_scenario_parse",
            "mf_scenario_run",
            "mf_report_csv",
            "mf_ei_exp",
            "mf_bch_log",
            "mf_last_error_message",
        ] {
            assert!(text.contains(needle), "header lacks {needle}");
        }
    }
}
