use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use recirc_ffi::*;

fn last_error() -> String {
    let p = recirc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    recirc_string_free(s);
    out
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(recirc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn potential_and_beta_values() {
    // ε = diag(1, 0): ε:ε = 1, |ε| = 1
    let eps = [1.0, 0.0, 0.0, 0.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(recirc_potential(0.5, 0.3, eps.as_ptr(), &mut out), RecircStatus::Ok);
        assert!((out - (0.5 + 2.0 / 3.0 * 0.3)).abs() < 1e-15);
        assert_eq!(recirc_beta(0.5, 0.3, eps.as_ptr(), &mut out), RecircStatus::Ok);
        assert!((out - 1.6).abs() < 1e-15);
        // only the symmetric part counts: a pure rotation has zero strain
        let rot = [0.0, 1.0, -1.0, 0.0];
        assert_eq!(recirc_potential(0.5, 0.3, rot.as_ptr(), &mut out), RecircStatus::Ok);
        assert_eq!(out, 0.0);
    }
}

#[test]
fn invalid_arguments_report_errors() {
    let eps = [1.0, 0.0, 0.0, 0.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(recirc_potential(-1.0, 0.3, eps.as_ptr(), &mut out), RecircStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(recirc_beta(0.5, 0.3, ptr::null(), &mut out), RecircStatus::NullPointer);
        assert_eq!(recirc_beta(0.5, 0.3, eps.as_ptr(), ptr::null_mut()), RecircStatus::NullPointer);
        let mut sim = ptr::null_mut();
        assert_eq!(recirc_simulation_run(ptr::null_mut()), RecircStatus::NullPointer);
        let name = CString::new("no-such-preset").unwrap();
        assert_ne!(recirc_simulation_from_preset(name.as_ptr(), &mut sim), RecircStatus::Ok);
        assert!(sim.is_null());
        recirc_simulation_free(ptr::null_mut());
        recirc_string_free(ptr::null_mut());
    }
}

#[test]
fn validate_reports_paths() {
    let json = include_str!("../../core/presets/zero_data.json").replace("\"nu\": 0.01", "\"nu\": -0.01");
    assert!(json.contains("-0.01"), "fixture edit did not apply");
    let c = CString::new(json).unwrap();
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(recirc_config_validate(c.as_ptr(), &mut report), RecircStatus::Config);
        let doc: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(doc["valid"], false);
        assert_eq!(doc["errors"][0]["path"], "fluid.nu");
        assert!(last_error().contains("fluid.nu"));

        let ok = CString::new(include_str!("../../core/presets/four_pump.json")).unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(recirc_config_validate(ok.as_ptr(), &mut report), RecircStatus::Ok);
        assert_eq!(take(report), r#"{"errors":[],"valid":true}"#);
    }
}

#[test]
fn zero_data_run_through_handle() {
    let name = CString::new("zero-data").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(recirc_simulation_from_preset(name.as_ptr(), &mut sim), RecircStatus::Ok);
        let mut count = 0usize;
        assert_eq!(recirc_simulation_state_count(sim, &mut count), RecircStatus::NotRun);
        assert_eq!(recirc_simulation_run(sim), RecircStatus::Ok);
        let mut modes = 0usize;
        assert_eq!(recirc_simulation_modes(sim, &mut modes), RecircStatus::Ok);
        assert_eq!(recirc_simulation_state_count(sim, &mut count), RecircStatus::Ok);
        assert_eq!((modes, count), (10, 101));

        let mut t = -1.0;
        let mut buf = vec![f64::NAN; modes];
        assert_eq!(recirc_simulation_copy_state(sim, count - 1, &mut t, buf.as_mut_ptr(), modes), RecircStatus::Ok);
        assert_eq!(t, 1.0);
        assert!(buf.iter().all(|&x| x == 0.0));
        assert_eq!(
            recirc_simulation_copy_state(sim, 0, &mut t, buf.as_mut_ptr(), modes - 1),
            RecircStatus::BufferTooSmall
        );
        assert_eq!(
            recirc_simulation_copy_state(sim, count, &mut t, buf.as_mut_ptr(), modes),
            RecircStatus::InvalidArgument
        );

        let mut json = ptr::null_mut();
        assert_eq!(recirc_simulation_summary_json(sim, &mut json), RecircStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(doc["status"], "ok");
        assert_eq!(doc["max_velocity_l2"], 0.0);
        recirc_simulation_free(sim);
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/recirc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["recirc_simulation_new", "recirc_last_error", "RECIRC_STATUS_OK", "typedef struct RecircSimulation"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status()
    else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(status.success());
}
