//! C ABI over the simulator: build a run from scenario or files, execute a
//! scheduler against it, read summary figures, and write the report files.
//!
//! Conventions:
//! - every fallible call returns an [`EcoLifeStatus`]; `ECOLIFE_OK` is 0
//! - a failed call stores a message retrievable via `ecolife_last_error`
//!   (thread-local, borrowed, valid until the next failing call)
//! - `EcoLifeRun` is opaque; free it with `ecolife_run_free`
//! - strings returned by `ecolife_summary_json` are freed with
//!   `ecolife_string_free`
//!
//! The header is generated into `include/ecolife.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use serde::Deserialize;

use ecolife::config::default_pair;
use ecolife::policy::{build_policy, PolicyKind, PolicyParams};
use ecolife::report::{emit_report, PolicyRun};
use ecolife::scenario::{generate_scenario, ScenarioKind};
use ecolife::scheduler::ObjectiveWeights;
use ecolife::sim::{run, SimConfig};
use ecolife::workload::{load_ci, load_profiles, load_trace};
use ecolife::{CarbonIntensitySeries, FunctionProfile, Generation, InvocationTrace};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcoLifeStatus {
    EcolifeOk = 0,
    EcolifeNullArgument = 1,
    EcolifeInvalidUtf8 = 2,
    EcolifeConfigError = 3,
    EcolifeIoError = 4,
    EcolifeRunError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let cleaned = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn fail(status: EcoLifeStatus, msg: impl Into<String>) -> EcoLifeStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &ecolife::Error) -> EcoLifeStatus {
    match err {
        ecolife::Error::Io(_) => EcoLifeStatus::EcolifeIoError,
        ecolife::Error::Config(_) | ecolife::Error::Parse { .. } | ecolife::Error::Ordering { .. } => {
            EcoLifeStatus::EcolifeConfigError
        }
        _ => EcoLifeStatus::EcolifeRunError,
    }
}

/// A completed simulation: records plus summary, ready for inspection or
/// report emission. Opaque across the ABI.
pub struct EcoLifeRun {
    run: PolicyRun,
}

/// Optional run options, passed as a JSON object. Unknown keys are
/// rejected. All fields are optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Options {
    lambda_s: Option<f64>,
    lambda_c: Option<f64>,
    kat: Option<Vec<f64>>,
    mem_old: Option<f64>,
    mem_new: Option<f64>,
    particles: Option<usize>,
    iters: Option<usize>,
    window: Option<usize>,
    perception_response: Option<bool>,
    pool_adjustment: Option<bool>,
}

unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, EcoLifeStatus> {
    if ptr.is_null() {
        return Err(fail(
            EcoLifeStatus::EcolifeNullArgument,
            format!("{name} must not be null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail(
            EcoLifeStatus::EcolifeInvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn optional_str<'a>(ptr: *const c_char, name: &str) -> Result<Option<&'a str>, EcoLifeStatus> {
    if ptr.is_null() {
        Ok(None)
    } else {
        required_str(ptr, name).map(Some)
    }
}

fn parse_options(text: Option<&str>) -> Result<Options, EcoLifeStatus> {
    match text {
        None | Some("") => Ok(Options::default()),
        Some(json) => serde_json::from_str(json).map_err(|e| {
            fail(
                EcoLifeStatus::EcolifeConfigError,
                format!("options json: {e}"),
            )
        }),
    }
}

fn execute(
    scheduler: &str,
    seed: u64,
    options: Options,
    trace: InvocationTrace,
    ci: CarbonIntensitySeries,
    profiles: Vec<FunctionProfile>,
) -> Result<*mut EcoLifeRun, EcoLifeStatus> {
    let kind: PolicyKind = scheduler
        .parse()
        .map_err(|e: ecolife::Error| fail(EcoLifeStatus::EcolifeConfigError, e.to_string()))?;
    let weights = ObjectiveWeights::new(
        options.lambda_s.unwrap_or(0.5),
        options.lambda_c.unwrap_or(0.5),
    )
    .map_err(|e| fail(EcoLifeStatus::EcolifeConfigError, e.to_string()))?;
    let mut params = PolicyParams {
        weights,
        seed,
        ..PolicyParams::default()
    };
    if let Some(kat) = options.kat {
        params.kat = kat;
    }
    if let Some(v) = options.particles {
        params.particles = v;
    }
    if let Some(v) = options.iters {
        params.iterations = v;
    }
    if let Some(v) = options.window {
        params.history_window = v;
    }
    if let Some(v) = options.perception_response {
        params.perception_response = v;
    }
    if let Some(v) = options.pool_adjustment {
        params.pool_adjustment = v;
    }
    let cfg = SimConfig {
        mem_old_mib: options.mem_old.unwrap_or(15_360.0),
        mem_new_mib: options.mem_new.unwrap_or(15_360.0),
        weights,
        kat: params.kat.clone(),
    };
    let hw = default_pair();
    let mut policy = build_policy(kind, &trace, &profiles, &hw, &ci, &params)
        .map_err(|e| fail(status_of(&e), e.to_string()))?;
    let (records, summary) = run(&trace, policy.as_mut(), &profiles, &hw, &ci, &cfg)
        .map_err(|e| fail(status_of(&e), e.to_string()))?;
    let handle = Box::new(EcoLifeRun {
        run: PolicyRun {
            kind,
            records,
            summary,
        },
    });
    Ok(Box::into_raw(handle))
}

/// Generate a named synthetic scenario and run `scheduler` against it.
///
/// `options_json` may be null or a JSON object (see the crate docs for the
/// accepted keys). On success `*out` owns the run.
///
/// # Safety
/// `scenario` and `scheduler` must be valid NUL-terminated strings;
/// `options_json` may be null; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecolife_run_from_scenario(
    scenario: *const c_char,
    scheduler: *const c_char,
    seed: u64,
    options_json: *const c_char,
    out: *mut *mut EcoLifeRun,
) -> EcoLifeStatus {
    if out.is_null() {
        return fail(EcoLifeStatus::EcolifeNullArgument, "out must not be null");
    }
    let result = (|| {
        let scenario = required_str(scenario, "scenario")?;
        let scheduler = required_str(scheduler, "scheduler")?;
        let options = parse_options(optional_str(options_json, "options_json")?)?;
        let kind: ScenarioKind = scenario
            .parse()
            .map_err(|e: ecolife::Error| fail(EcoLifeStatus::EcolifeConfigError, e.to_string()))?;
        let s = generate_scenario(kind, seed);
        execute(scheduler, seed, options, s.trace, s.ci, s.profiles)
    })();
    match result {
        Ok(handle) => {
            *out = handle;
            EcoLifeStatus::EcolifeOk
        }
        Err(status) => status,
    }
}

/// Load a trace, carbon-intensity series, and profile catalog from files
/// and run `scheduler` against them. The built-in hardware pair is used.
///
/// # Safety
/// Path and scheduler pointers must be valid NUL-terminated strings;
/// `options_json` may be null; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecolife_run_from_files(
    trace_path: *const c_char,
    ci_path: *const c_char,
    profiles_path: *const c_char,
    scheduler: *const c_char,
    seed: u64,
    options_json: *const c_char,
    out: *mut *mut EcoLifeRun,
) -> EcoLifeStatus {
    if out.is_null() {
        return fail(EcoLifeStatus::EcolifeNullArgument, "out must not be null");
    }
    let result = (|| {
        let trace_path = required_str(trace_path, "trace_path")?;
        let ci_path = required_str(ci_path, "ci_path")?;
        let profiles_path = required_str(profiles_path, "profiles_path")?;
        let scheduler = required_str(scheduler, "scheduler")?;
        let options = parse_options(optional_str(options_json, "options_json")?)?;
        let as_status = |e: ecolife::Error| fail(status_of(&e), e.to_string());
        let trace = load_trace(std::path::Path::new(trace_path)).map_err(as_status)?;
        let ci = load_ci(std::path::Path::new(ci_path)).map_err(as_status)?;
        let profiles = load_profiles(
            std::path::Path::new(profiles_path),
            &[Generation::Old, Generation::New],
        )
        .map_err(as_status)?;
        execute(scheduler, seed, options, trace, ci, profiles)
    })();
    match result {
        Ok(handle) => {
            *out = handle;
            EcoLifeStatus::EcolifeOk
        }
        Err(status) => status,
    }
}

/// Total service time over the run, seconds. Returns 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_total_service_time_s(run: *const EcoLifeRun) -> f64 {
    if run.is_null() {
        return 0.0;
    }
    (*run).run.summary.total_service_time_s
}

/// Total carbon over the run (service plus keep-alive), grams.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_total_carbon_g(run: *const EcoLifeRun) -> f64 {
    if run.is_null() {
        return 0.0;
    }
    (*run).run.summary.total_carbon_g
}

/// Realized combined objective of the run.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_total_objective(run: *const EcoLifeRun) -> f64 {
    if run.is_null() {
        return 0.0;
    }
    (*run).run.summary.total_objective
}

/// Number of invocations processed.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_invocations(run: *const EcoLifeRun) -> u64 {
    if run.is_null() {
        return 0;
    }
    (*run).run.summary.invocations as u64
}

/// Number of cold starts.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_cold_starts(run: *const EcoLifeRun) -> u64 {
    if run.is_null() {
        return 0;
    }
    (*run).run.summary.cold_starts as u64
}

/// Number of warm-pool evictions.
///
/// # Safety
/// `run` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn ecolife_evictions(run: *const EcoLifeRun) -> u64 {
    if run.is_null() {
        return 0;
    }
    (*run).run.summary.evictions as u64
}

/// Serialize the run summary to a JSON string. Free it with
/// `ecolife_string_free`.
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecolife_summary_json(
    run: *const EcoLifeRun,
    out: *mut *mut c_char,
) -> EcoLifeStatus {
    if run.is_null() || out.is_null() {
        return fail(EcoLifeStatus::EcolifeNullArgument, "run and out must not be null");
    }
    match serde_json::to_string_pretty(&(*run).run.summary) {
        Ok(json) => match CString::new(json) {
            Ok(cstring) => {
                *out = cstring.into_raw();
                EcoLifeStatus::EcolifeOk
            }
            Err(e) => fail(EcoLifeStatus::EcolifeRunError, e.to_string()),
        },
        Err(e) => fail(EcoLifeStatus::EcolifeRunError, e.to_string()),
    }
}

/// Write the run's report files (records, summary, cdf, overhead) into
/// `out_dir`.
///
/// # Safety
/// `run` must be a live handle; `out_dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ecolife_write_report(
    run: *const EcoLifeRun,
    out_dir: *const c_char,
) -> EcoLifeStatus {
    if run.is_null() {
        return fail(EcoLifeStatus::EcolifeNullArgument, "run must not be null");
    }
    let dir = match required_str(out_dir, "out_dir") {
        Ok(s) => PathBuf::from(s),
        Err(status) => return status,
    };
    match emit_report(&dir, std::slice::from_ref(&(*run).run)) {
        Ok(_) => EcoLifeStatus::EcolifeOk,
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

/// Last error message for this thread; empty until a call fails. Borrowed:
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ecolife_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must have been returned by `ecolife_summary_json` and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecolife_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Free a run handle.
///
/// # Safety
/// `run` must have been returned by a constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecolife_run_free(run: *mut EcoLifeRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn scenario_run_round_trip() {
        let mut handle: *mut EcoLifeRun = ptr::null_mut();
        let status = unsafe {
            ecolife_run_from_scenario(
                cstr("poisson-small").as_ptr(),
                cstr("ecolife").as_ptr(),
                5,
                ptr::null(),
                &mut handle,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeOk);
        assert!(!handle.is_null());
        unsafe {
            assert_eq!(ecolife_invocations(handle), 300);
            assert!(ecolife_total_carbon_g(handle) > 0.0);
            assert!(ecolife_total_service_time_s(handle) > 0.0);
            assert!(ecolife_total_objective(handle) > 0.0);
            assert!(ecolife_cold_starts(handle) <= 300);

            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(
                ecolife_summary_json(handle, &mut json),
                EcoLifeStatus::EcolifeOk
            );
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            assert!(text.contains("\"policy\": \"ecolife\""));
            ecolife_string_free(json);

            let dir = tempfile::tempdir().unwrap();
            assert_eq!(
                ecolife_write_report(handle, cstr(dir.path().to_str().unwrap()).as_ptr()),
                EcoLifeStatus::EcolifeOk
            );
            assert!(dir.path().join("records_ecolife.csv").exists());
            ecolife_run_free(handle);
        }
    }

    #[test]
    fn file_run_matches_scenario_run() {
        // Write scenario files, run via the file entry point, and compare
        // against the in-memory scenario run.
        let dir = tempfile::tempdir().unwrap();
        let scenario = generate_scenario(ScenarioKind::CiStep, 9);
        let (trace_p, ci_p, profiles_p) =
            ecolife::scenario::write_scenario(dir.path(), &scenario).unwrap();

        let mut from_files: *mut EcoLifeRun = ptr::null_mut();
        let status = unsafe {
            ecolife_run_from_files(
                cstr(trace_p.to_str().unwrap()).as_ptr(),
                cstr(ci_p.to_str().unwrap()).as_ptr(),
                cstr(profiles_p.to_str().unwrap()).as_ptr(),
                cstr("oracle").as_ptr(),
                9,
                ptr::null(),
                &mut from_files,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeOk);
        let mut from_scenario: *mut EcoLifeRun = ptr::null_mut();
        let status = unsafe {
            ecolife_run_from_scenario(
                cstr("ci-step").as_ptr(),
                cstr("oracle").as_ptr(),
                9,
                ptr::null(),
                &mut from_scenario,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeOk);
        unsafe {
            assert_eq!(
                ecolife_total_carbon_g(from_files),
                ecolife_total_carbon_g(from_scenario)
            );
            assert_eq!(
                ecolife_total_service_time_s(from_files),
                ecolife_total_service_time_s(from_scenario)
            );
            ecolife_run_free(from_files);
            ecolife_run_free(from_scenario);
        }
    }

    #[test]
    fn options_json_is_applied() {
        let mut handle: *mut EcoLifeRun = ptr::null_mut();
        let opts = cstr(r#"{"lambda_s": 1.0, "lambda_c": 0.0, "particles": 5, "iters": 3}"#);
        let status = unsafe {
            ecolife_run_from_scenario(
                cstr("poisson-small").as_ptr(),
                cstr("ecolife").as_ptr(),
                5,
                opts.as_ptr(),
                &mut handle,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeOk);
        unsafe { ecolife_run_free(handle) };

        let bad = cstr(r#"{"no_such_key": 1}"#);
        let status = unsafe {
            ecolife_run_from_scenario(
                cstr("poisson-small").as_ptr(),
                cstr("ecolife").as_ptr(),
                5,
                bad.as_ptr(),
                &mut handle,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeConfigError);
        let msg = unsafe { CStr::from_ptr(ecolife_last_error()) };
        assert!(msg.to_str().unwrap().contains("options json"));
    }

    #[test]
    fn error_paths_set_status_and_message() {
        let mut handle: *mut EcoLifeRun = ptr::null_mut();
        let status = unsafe {
            ecolife_run_from_scenario(
                ptr::null(),
                cstr("ecolife").as_ptr(),
                0,
                ptr::null(),
                &mut handle,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeNullArgument);

        let status = unsafe {
            ecolife_run_from_scenario(
                cstr("no-such-scenario").as_ptr(),
                cstr("ecolife").as_ptr(),
                0,
                ptr::null(),
                &mut handle,
            )
        };
        assert_eq!(status, EcoLifeStatus::EcolifeConfigError);
        let msg = unsafe { CStr::from_ptr(ecolife_last_error()) };
        assert!(msg.to_str().unwrap().contains("no-such-scenario"));

        let status = unsafe {
            ecolife_run_from_files(
                cstr("/nonexistent/trace.csv").as_ptr(),
                cstr("/nonexistent/ci.csv").as_ptr(),
                cstr("/nonexistent/profiles.json").as_ptr(),
                cstr("ecolife").as_ptr(),
                0,
                ptr::null(),
                &mut handle,
            )
        };
        assert!(matches!(
            status,
            EcoLifeStatus::EcolifeIoError | EcoLifeStatus::EcolifeConfigError
        ));
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ecolife.h");
        let text = std::fs::read_to_string(&header).expect("header generated at build time");
        for symbol in [
            "typedef struct EcoLifeRun EcoLifeRun;",
            "ECOLIFE_OK",
            "ecolife_run_from_scenario",
            "ecolife_run_from_files",
            "ecolife_total_carbon_g",
            "ecolife_summary_json",
            "ecolife_write_report",
            "ecolife_last_error",
            "ecolife_run_free",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}
