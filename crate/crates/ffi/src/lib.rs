//! C ABI for the transfer planner.
//!
//! Objects cross the boundary as opaque handles created by `jt_*_new`-style
//! functions and released with the matching `jt_*_free`. Every fallible call
//! returns a [`JtStatus`]; on failure a description is available from
//! [`jt_last_error_message`] on the calling thread. Strings returned through
//! `char **` out-parameters are owned by the caller and released with
//! [`jt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use jacobi_transfer::io;
use jacobi_transfer::planner::{reconstruct_states, Backend, Trajectory};
use jacobi_transfer::scenario::{self, Mode, Scenario, SolutionReport};
use jacobi_transfer::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    /// No transfer exists for the requested geometry or energy.
    Infeasible = 4,
    NotConverged = 5,
    EmptyResult = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtBackend {
    Ellipse = 0,
    Heatflow = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtMode {
    CoarseToFine = 0,
    RefineOnly = 1,
}

/// Transfer scenario: body, orbits and planner settings.
pub struct JtScenario(Scenario);

/// Result of [`jt_solve`].
pub struct JtReport(SolutionReport);

/// Sampled states along a solved transfer.
pub struct JtTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(JtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) | Error::Singular | Error::NonElliptic { .. } => JtStatus::InvalidInput,
            Error::Domain { .. }
            | Error::HillViolation { .. }
            | Error::InfeasibleSma { .. }
            | Error::DegeneratePlane
            | Error::NotOnEllipse { .. }
            | Error::TangentDegeneracy => JtStatus::Infeasible,
            Error::NotConverged { .. } | Error::StepFailure { .. } => JtStatus::NotConverged,
            Error::EmptyResult => JtStatus::EmptyResult,
            Error::Io { .. } => JtStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: JtStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, trapping panics and recording failures for the calling thread.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            JtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            JtStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(JtStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(JtStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(JtStatus::NullArgument, format!("{what} is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(JtStatus::NullArgument, format!("{what} is NULL")))
}

/// Clear `*out`, run `make`, and store the boxed result in `*out`.
unsafe fn produce<T>(out: *mut *mut T, make: impl FnOnce() -> Result<T, Failure>) -> JtStatus {
    if out.is_null() {
        set_error("output pointer is NULL".into());
        return JtStatus::NullArgument;
    }
    *out = ptr::null_mut();
    guard(|| {
        let value = make()?;
        *out = Box::into_raw(Box::new(value));
        Ok(())
    })
}

unsafe fn produce_string(out: *mut *mut c_char, make: impl FnOnce() -> Result<String, Failure>) -> JtStatus {
    if out.is_null() {
        set_error("output pointer is NULL".into());
        return JtStatus::NullArgument;
    }
    *out = ptr::null_mut();
    guard(|| {
        let s = CString::new(make()?).map_err(|_| fail(JtStatus::InvalidInput, "string contains NUL"))?;
        *out = s.into_raw();
        Ok(())
    })
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(JtStatus::NullArgument, "output pointer is NULL"));
    }
    *out = value;
    Ok(())
}

unsafe fn write_vec(out: *mut f64, v: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(JtStatus::NullArgument, "output array is NULL"));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    Ok(())
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread, or NULL. The
/// pointer stays valid until the next `jt_*` call on the same thread.
#[no_mangle]
pub extern "C" fn jt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a scenario from JSON text.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_from_json(json: *const c_char, out: *mut *mut JtScenario) -> JtStatus {
    produce(out, || Ok(JtScenario(Scenario::from_json(text(json, "json")?, "scenario")?)))
}

/// Load a scenario file, or a bundled scenario by name.
///
/// # Safety
/// As [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_resolve(path_or_name: *const c_char, out: *mut *mut JtScenario) -> JtStatus {
    produce(out, || Ok(JtScenario(Scenario::resolve(text(path_or_name, "path_or_name")?)?)))
}

/// # Safety
/// `scenario` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_to_json(scenario: *const JtScenario, out: *mut *mut c_char) -> JtStatus {
    produce_string(out, || Ok(io::to_json(&handle(scenario, "scenario")?.0)?))
}

/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_set_seed(scenario: *mut JtScenario, seed: u64) -> JtStatus {
    guard(|| {
        handle_mut(scenario, "scenario")?.0.planner.seed = seed;
        Ok(())
    })
}

/// `backend` takes a [`JtBackend`] value.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_set_backend(scenario: *mut JtScenario, backend: u32) -> JtStatus {
    guard(|| {
        let b = match backend {
            x if x == JtBackend::Ellipse as u32 => Backend::Ellipse,
            x if x == JtBackend::Heatflow as u32 => Backend::Heatflow,
            _ => return Err(fail(JtStatus::OutOfRange, format!("unknown backend {backend}"))),
        };
        handle_mut(scenario, "scenario")?.0.planner.backend = b;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jt_scenario_free(scenario: *mut JtScenario) {
    free_box(scenario)
}

/// Plan the transfer. `mode` takes a [`JtMode`] value. Returns
/// `JT_STATUS_EMPTY_RESULT` when no feasible candidate exists.
///
/// # Safety
/// `scenario` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_solve(scenario: *const JtScenario, mode: u32, out: *mut *mut JtReport) -> JtStatus {
    produce(out, || {
        let m = match mode {
            x if x == JtMode::CoarseToFine as u32 => Mode::CoarseToFine,
            x if x == JtMode::RefineOnly as u32 => Mode::RefineOnly,
            _ => return Err(fail(JtStatus::OutOfRange, format!("unknown mode {mode}"))),
        };
        Ok(JtReport(scenario::solve(&handle(scenario, "scenario")?.0, m)?))
    })
}

/// # Safety
/// As [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_report_from_json(json: *const c_char, out: *mut *mut JtReport) -> JtStatus {
    produce(out, || Ok(JtReport(io::from_json(text(json, "json")?, "report")?)))
}

/// # Safety
/// `report` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_report_to_json(report: *const JtReport, out: *mut *mut c_char) -> JtStatus {
    produce_string(out, || Ok(io::to_json(&handle(report, "report")?.0)?))
}

/// Total impulse (km/s).
///
/// # Safety
/// `report` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn jt_report_total_dv(report: *const JtReport, out: *mut f64) -> JtStatus {
    guard(|| write_out(out, handle(report, "report")?.0.total_dv))
}

/// Time of flight (s).
///
/// # Safety
/// As [`jt_report_total_dv`].
#[no_mangle]
pub unsafe extern "C" fn jt_report_tof(report: *const JtReport, out: *mut f64) -> JtStatus {
    guard(|| write_out(out, handle(report, "report")?.0.tof))
}

/// Departure and arrival impulse vectors (km/s), three values each.
///
/// # Safety
/// `report` must be NULL or a live handle; `dv0` and `dvf` NULL or arrays
/// of at least three doubles.
#[no_mangle]
pub unsafe extern "C" fn jt_report_impulses(report: *const JtReport, dv0: *mut f64, dvf: *mut f64) -> JtStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        write_vec(dv0, r.dv0.as_slice())?;
        write_vec(dvf, r.dvf.as_slice())
    })
}

/// Departure and arrival positions (km), three values each.
///
/// # Safety
/// As [`jt_report_impulses`].
#[no_mangle]
pub unsafe extern "C" fn jt_report_endpoints(report: *const JtReport, p0: *mut f64, pf: *mut f64) -> JtStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        write_vec(p0, r.solution.p0.as_slice())?;
        write_vec(pf, r.solution.pf.as_slice())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jt_report_free(report: *mut JtReport) {
    free_box(report)
}

/// Sample `n` states along the solved transfer, uniform in curve parameter.
///
/// # Safety
/// `report` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_trajectory_new(report: *const JtReport, n: usize, out: *mut *mut JtTrajectory) -> JtStatus {
    produce(out, || {
        let r = &handle(report, "report")?.0;
        Ok(JtTrajectory(reconstruct_states(&r.model, &r.solution, n)?))
    })
}

/// # Safety
/// `traj` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn jt_trajectory_len(traj: *const JtTrajectory, out: *mut usize) -> JtStatus {
    guard(|| write_out(out, handle(traj, "trajectory")?.0.times.len()))
}

/// Row `i` as `(t, x, y, z, vx, vy, vz)`.
///
/// # Safety
/// `traj` must be NULL or a live handle; `row` NULL or an array of at least
/// seven doubles.
#[no_mangle]
pub unsafe extern "C" fn jt_trajectory_row(traj: *const JtTrajectory, i: usize, row: *mut f64) -> JtStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.0;
        let s = t.states.get(i).ok_or_else(|| {
            fail(JtStatus::OutOfRange, format!("row {i} out of range (len {})", t.states.len()))
        })?;
        write_vec(row, &[t.times[i], s.r.x, s.r.y, s.r.z, s.v.x, s.v.y, s.v.z])
    })
}

/// The whole trajectory as CSV with a `t,x,y,z,vx,vy,vz` header.
///
/// # Safety
/// `traj` must be NULL or a live handle; `out` as in [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_trajectory_to_csv(traj: *const JtTrajectory, out: *mut *mut c_char) -> JtStatus {
    produce_string(out, || Ok(io::trajectory_to_csv(&handle(traj, "trajectory")?.0)?))
}

/// # Safety
/// `traj` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jt_trajectory_free(traj: *mut JtTrajectory) {
    free_box(traj)
}

/// Optimal-ΔV grid over a `resolution` x `resolution` division of both orbits
/// (plus the closing row and column) as CSV in
/// `csv_out` and the axis metadata as JSON in `meta_out`.
///
/// # Safety
/// `scenario` must be NULL or a live handle; `csv_out` and `meta_out` as the
/// `out` argument of [`jt_scenario_from_json`].
#[no_mangle]
pub unsafe extern "C" fn jt_contour(
    scenario: *const JtScenario,
    resolution: usize,
    csv_out: *mut *mut c_char,
    meta_out: *mut *mut c_char,
) -> JtStatus {
    if meta_out.is_null() {
        set_error("output pointer is NULL".into());
        return JtStatus::NullArgument;
    }
    *meta_out = ptr::null_mut();
    let mut meta = None;
    let status = produce_string(csv_out, || {
        let (grid, report) = scenario::contour(&handle(scenario, "scenario")?.0, resolution)?;
        meta = Some(io::to_json(&report)?);
        Ok(io::grid_to_csv(&grid.values)?)
    });
    if status == JtStatus::Ok {
        let m = CString::new(meta.expect("set on success")).expect("json has no NUL");
        *meta_out = m.into_raw();
    }
    status
}

/// Write a report to `path` as JSON (atomically).
///
/// # Safety
/// `report` must be NULL or a live handle; `path` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jt_report_save(report: *const JtReport, path: *const c_char) -> JtStatus {
    guard(|| Ok(io::write_json(Path::new(text(path, "path")?), &handle(report, "report")?.0)?))
}
