//! C interface to the recirc simulator.
//!
//! Every fallible function returns a [`RecircStatus`]. On failure a message is kept per
//! thread and can be read with [`recirc_last_error`]. Strings handed out by the library
//! must be released with [`recirc_string_free`]; simulations with
//! [`recirc_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use recirc_core::cli::pipeline::{simulate, Simulation, SimulationOutcome};
use recirc_core::config::{preset, RunConfig};
use recirc_core::turbulence::{beta, potential, ClosureParams, Strain};
use recirc_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecircStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    /// The simulation has not been run yet.
    NotRun = 6,
    BufferTooSmall = 7,
    Panic = 99,
}

/// Opaque simulation handle.
pub struct RecircSimulation {
    sim: Simulation,
    outcome: Option<SimulationOutcome>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> RecircStatus {
    match err {
        Error::Config(_) | Error::Conflict(_) | Error::Capacity { .. } => RecircStatus::Config,
        Error::InvalidArgument(_) | Error::Range { .. } | Error::Parse(_) | Error::Mesh(_) => {
            RecircStatus::InvalidArgument
        }
        Error::Io(_) | Error::Fingerprint { .. } => RecircStatus::Io,
        _ => RecircStatus::Numerical,
    }
}

fn fail(err: Error) -> RecircStatus {
    let status = status_of(&err);
    let msg = match &err {
        Error::Config(issues) => {
            let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
            format!("{err}: {}", lines.join("; "))
        }
        _ => err.to_string(),
    };
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`RecircStatus::Panic`].
fn guard(f: impl FnOnce() -> RecircStatus) -> RecircStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            RecircStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, RecircStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(RecircStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        RecircStatus::InvalidArgument
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message for the last failure on this thread, or null. Owned by the library and valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn recirc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn recirc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn recirc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_strain(eps: *const f64) -> Result<Strain<2>, RecircStatus> {
    if eps.is_null() {
        set_error("null strain");
        return Err(RecircStatus::NullPointer);
    }
    let e = std::slice::from_raw_parts(eps, 4);
    Ok(Strain::from_gradient(&[[e[0], e[1]], [e[2], e[3]]]))
}

fn closure(nu: f64, nu_tur: f64) -> Result<ClosureParams, RecircStatus> {
    ClosureParams::new(nu, nu_tur).map_err(fail)
}

/// Dissipation potential of the symmetric part of the row-major 2x2 tensor `eps`.
///
/// # Safety
/// `eps` must point to 4 doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn recirc_potential(nu: f64, nu_tur: f64, eps: *const f64, out: *mut f64) -> RecircStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output");
            return RecircStatus::NullPointer;
        }
        match (closure(nu, nu_tur), read_strain(eps)) {
            (Ok(p), Ok(e)) => {
                *out = potential(&e, &p);
                RecircStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}

/// Effective viscosity `2ν + 2ν_tur|ε|` for the row-major 2x2 tensor `eps`.
///
/// # Safety
/// `eps` must point to 4 doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn recirc_beta(nu: f64, nu_tur: f64, eps: *const f64, out: *mut f64) -> RecircStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output");
            return RecircStatus::NullPointer;
        }
        match (closure(nu, nu_tur), read_strain(eps)) {
            (Ok(p), Ok(e)) => {
                *out = beta(&e, &p);
                RecircStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}

/// Validates a JSON run config. `report` (optional) receives a JSON document
/// `{"valid": bool, "errors": [{"path", "message"}]}` to free with [`recirc_string_free`].
/// Returns `Ok` for a valid config and `Config` otherwise.
///
/// # Safety
/// `json` must be a NUL-terminated string; `report` null or writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_config_validate(json: *const c_char, report: *mut *mut c_char) -> RecircStatus {
    guard(|| {
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let issues = match RunConfig::from_json(text) {
            Ok(_) => Vec::new(),
            Err(Error::Config(issues)) => issues,
            Err(e) => return fail(e),
        };
        if !report.is_null() {
            let doc = serde_json::json!({ "valid": issues.is_empty(), "errors": issues });
            *report = into_c_string(doc.to_string());
        }
        if issues.is_empty() {
            RecircStatus::Ok
        } else {
            fail(Error::Config(issues))
        }
    })
}

unsafe fn create(config: Result<RunConfig, Error>, out: *mut *mut RecircSimulation) -> RecircStatus {
    if out.is_null() {
        set_error("null output handle");
        return RecircStatus::NullPointer;
    }
    *out = ptr::null_mut();
    match config.and_then(|c| Simulation::prepare(&c)) {
        Ok(sim) => {
            *out = Box::into_raw(Box::new(RecircSimulation { sim, outcome: None }));
            RecircStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Builds the lifting and eigenbasis for a JSON run config.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_new(json: *const c_char, out: *mut *mut RecircSimulation) -> RecircStatus {
    guard(|| match read_str(json) {
        Ok(text) => create(RunConfig::from_json(text), out),
        Err(s) => s,
    })
}

/// Like [`recirc_simulation_new`] for a built-in config (`four-pump`, `zero-data`,
/// `vortex-decay`, `manufactured`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_from_preset(
    name: *const c_char,
    out: *mut *mut RecircSimulation,
) -> RecircStatus {
    guard(|| match read_str(name) {
        Ok(name) => create(preset(name), out),
        Err(s) => s,
    })
}

/// # Safety
/// `sim` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_free(sim: *mut RecircSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut RecircSimulation) -> Result<&'a mut RecircSimulation, RecircStatus> {
    sim.as_mut().ok_or_else(|| {
        set_error("null simulation handle");
        RecircStatus::NullPointer
    })
}

unsafe fn outcome<'a>(sim: *mut RecircSimulation) -> Result<&'a mut RecircSimulation, RecircStatus> {
    let h = handle(sim)?;
    if h.outcome.is_none() {
        set_error("simulation has not been run");
        return Err(RecircStatus::NotRun);
    }
    Ok(h)
}

/// Integrates to the final time. A failed step returns `Numerical`; the partial
/// trajectory stays available.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_run(sim: *mut RecircSimulation) -> RecircStatus {
    guard(|| {
        let h = match handle(sim) {
            Ok(h) => h,
            Err(s) => return s,
        };
        match simulate(&h.sim) {
            Ok(out) => {
                let failed = out.summary.error.clone();
                h.outcome = Some(out);
                match failed {
                    Some(msg) => {
                        set_error(msg);
                        RecircStatus::Numerical
                    }
                    None => RecircStatus::Ok,
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of reduced modes.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_modes(sim: *mut RecircSimulation, out: *mut usize) -> RecircStatus {
    guard(|| match (handle(sim), out.is_null()) {
        (Ok(h), false) => {
            *out = h.sim.basis.len();
            RecircStatus::Ok
        }
        (Err(s), _) => s,
        (_, true) => {
            set_error("null output");
            RecircStatus::NullPointer
        }
    })
}

/// Number of saved states (steps + 1) after a run.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_state_count(sim: *mut RecircSimulation, out: *mut usize) -> RecircStatus {
    guard(|| match outcome(sim) {
        Ok(h) if !out.is_null() => {
            *out = h.outcome.as_ref().map_or(0, |o| o.trajectory.len());
            RecircStatus::Ok
        }
        Ok(_) => {
            set_error("null output");
            RecircStatus::NullPointer
        }
        Err(s) => s,
    })
}

/// Copies the time and mode coefficients of saved state `index` into `time` and `buf`
/// (`len` must be at least the mode count).
///
/// # Safety
/// `sim` must be a live handle, `time` writable and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_copy_state(
    sim: *mut RecircSimulation,
    index: usize,
    time: *mut f64,
    buf: *mut f64,
    len: usize,
) -> RecircStatus {
    guard(|| {
        let h = match outcome(sim) {
            Ok(h) => h,
            Err(s) => return s,
        };
        let traj = &h.outcome.as_ref().expect("checked").trajectory;
        if index >= traj.len() {
            set_error(format!("state index {index} out of range ({} states)", traj.len()));
            return RecircStatus::InvalidArgument;
        }
        if time.is_null() || buf.is_null() {
            set_error("null output");
            return RecircStatus::NullPointer;
        }
        let z = &traj.states[index];
        if len < z.len() {
            set_error(format!("buffer holds {len} values, need {}", z.len()));
            return RecircStatus::BufferTooSmall;
        }
        *time = traj.times[index];
        std::slice::from_raw_parts_mut(buf, z.len()).copy_from_slice(z);
        RecircStatus::Ok
    })
}

/// Run summary as JSON, to free with [`recirc_string_free`].
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn recirc_simulation_summary_json(
    sim: *mut RecircSimulation,
    out: *mut *mut c_char,
) -> RecircStatus {
    guard(|| {
        let h = match outcome(sim) {
            Ok(h) => h,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output");
            return RecircStatus::NullPointer;
        }
        let summary = &h.outcome.as_ref().expect("checked").summary;
        match serde_json::to_string(summary) {
            Ok(s) => {
                *out = into_c_string(s);
                RecircStatus::Ok
            }
            Err(e) => fail(Error::Parse(e.to_string())),
        }
    })
}
