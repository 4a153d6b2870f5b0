use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use uan_relay_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(uan_last_error()) }.to_string_lossy().into_owned()
}

fn small_scenario() -> *mut UanScenario {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { uan_scenario_default(&mut s) }, UanStatus::Ok);
    unsafe {
        assert_eq!(uan_scenario_set_bands(s, 8), UanStatus::Ok);
        assert_eq!(uan_scenario_set_trials(s, 2000, 3), UanStatus::Ok);
    }
    s
}

#[test]
fn run_and_read_report() {
    let s = small_scenario();
    unsafe {
        assert_eq!(uan_scenario_set_scheme(s, UanScheme::Approx), UanStatus::Ok);
        assert_eq!(uan_scenario_set_gain_ratio(s, 4.0, 1.0), UanStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(uan_run(s, &mut r), UanStatus::Ok, "{}", last_error());
        let mut d = 0.0;
        assert_eq!(uan_report_relay_km(r, &mut d), UanStatus::Ok);
        // a stronger first hop pushes the relay towards the destination
        assert!(d > 4.95 && d < 9.9, "{d}");
        let mut n = 0usize;
        assert_eq!(uan_report_band_count(r, &mut n), UanStatus::Ok);
        assert_eq!(n, 8);
        let mut total = 0.0;
        for q in 0..n {
            let mut b = UanBand::default();
            assert_eq!(uan_report_band(r, q, &mut b), UanStatus::Ok);
            total += b.p_s + b.p_r;
        }
        assert!((total / 1e10 - 1.0).abs() < 1e-9);
        let mut b = UanBand::default();
        assert_eq!(uan_report_band(r, n, &mut b), UanStatus::OutOfRange);
        assert!(last_error().contains("band 8"));

        let mut o = UanOutage::default();
        assert_eq!(uan_report_outage(r, &mut o), UanStatus::Ok);
        assert_eq!((o.trials, o.seed), (2000, 3));
        assert!((0.0..=1.0).contains(&o.p_hat));

        let mut json = ptr::null_mut();
        assert_eq!(uan_report_to_json(r, &mut json), UanStatus::Ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"scheme\": \"approx\""));
        uan_string_free(json);
        uan_report_free(r);
        uan_scenario_free(s);
    }
}

#[test]
fn json_round_trip_keeps_hash() {
    let s = small_scenario();
    unsafe {
        let (mut json, mut h1, mut h2) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(uan_scenario_to_json(s, &mut json), UanStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(uan_scenario_from_json(json, &mut back), UanStatus::Ok);
        assert_eq!(uan_scenario_hash(s, &mut h1), UanStatus::Ok);
        assert_eq!(uan_scenario_hash(back, &mut h2), UanStatus::Ok);
        assert_eq!(CStr::from_ptr(h1), CStr::from_ptr(h2));
        for p in [json, h1, h2] {
            uan_string_free(p);
        }
        uan_scenario_free(back);
        uan_scenario_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new(r#"{"n": 4, "bogus": true}"#).unwrap();
        assert_eq!(uan_scenario_from_json(bad.as_ptr(), &mut s), UanStatus::InvalidConfig);
        assert!(s.is_null());
        assert!(last_error().contains("bogus"));

        assert_eq!(uan_scenario_from_json(ptr::null(), &mut s), UanStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(uan_scenario_from_json(invalid.as_ptr().cast(), &mut s), UanStatus::InvalidUtf8);

        let s = small_scenario();
        assert_eq!(uan_scenario_set_bands(s, 0), UanStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(uan_run(s, &mut r), UanStatus::InvalidConfig);
        assert!(r.is_null());
        assert_eq!(uan_run(s, ptr::null_mut()), UanStatus::NullPointer);
        assert_eq!(uan_report_relay_km(ptr::null(), &mut 0.0), UanStatus::NullPointer);

        let mut c = std::mem::MaybeUninit::<UanCertificate>::uninit();
        assert_eq!(uan_scenario_set_bands(s, 8), UanStatus::Ok);
        assert_eq!(uan_hessian_certificate(s, 10.0, 1e5, 1e5, 20.0, c.as_mut_ptr()), UanStatus::Domain);
        uan_scenario_free(s);
        uan_scenario_free(ptr::null_mut());
        uan_report_free(ptr::null_mut());
        uan_string_free(ptr::null_mut());
    }
}

#[test]
fn certificate_at_interior_point() {
    let s = small_scenario();
    unsafe {
        let mut c = std::mem::MaybeUninit::<UanCertificate>::uninit();
        assert_eq!(uan_hessian_certificate(s, 10.0, 1e5, 2e5, 5.0, c.as_mut_ptr()), UanStatus::Ok);
        let c = c.assume_init();
        assert_eq!(c.verdict, UanVerdict::Pass);
        assert!(c.det2 < 0.0 && c.det3 > 0.0 && c.det4 < 0.0);
        uan_scenario_free(s);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/uan_relay.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "uan_run",
        "uan_last_error",
        "uan_hessian_certificate",
        "UAN_STATUS_PANIC",
        "typedef struct UanScenario UanScenario",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile_dir();
    let src = dir.join("check.c");
    std::fs::write(&src, "#include \"uan_relay.h\"\nint main(void) { UanScenario *s = 0; return uan_scenario_default(&s) == UAN_STATUS_OK ? 0 : 1; }\n").unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("header_check");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
