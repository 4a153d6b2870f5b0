//! C interface to `uan-relay`.
//!
//! Every function returns a [`UanStatus`]; on anything but `UAN_STATUS_OK`
//! a description is available from [`uan_last_error`] on the same thread.
//! Objects are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Strings returned by the library are released
//! with [`uan_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uan_relay::joint_opt::{self, Verdict};
use uan_relay::scenario::{self, RunReport, ScenarioConfig, Scheme};
use uan_relay::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Domain = 4,
    /// The budget cannot support the requested allocation.
    Infeasible = 5,
    NoConvergence = 6,
    OutOfRange = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UanScheme {
    UpaFixed = 0,
    OrpUpa = 1,
    OpaMidpoint = 2,
    Joint = 3,
    Approx = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UanVerdict {
    Pass = 0,
    Fail = 1,
    NotApplicable = 2,
    Inconclusive = 3,
}

/// Scenario configuration. Create with [`uan_scenario_default`] or
/// [`uan_scenario_from_json`].
pub struct UanScenario(ScenarioConfig);

/// Result of [`uan_run`].
pub struct UanReport(RunReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UanOutage {
    pub p_hat: f64,
    pub ci95_halfwidth: f64,
    pub trials: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UanBand {
    pub f_khz: f64,
    pub p_s: f64,
    pub p_r: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UanCertificate {
    pub det2: f64,
    pub det3: f64,
    pub det4: f64,
    pub closed_form_det3: f64,
    pub step_disagreement: f64,
    pub verdict: UanVerdict,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(UanStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => UanStatus::Domain,
            Error::InvalidConfig(_) | Error::Json(_) => UanStatus::InvalidConfig,
            Error::BudgetTooSmall { .. } => UanStatus::Infeasible,
            Error::FitDidNotConverge { .. } => UanStatus::NoConvergence,
            Error::Io(_) | Error::Csv(_) => UanStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UanStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> UanStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            UanStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            UanStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure(UanStatus::InvalidUtf8, e.to_string()))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn uan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_default(out: *mut *mut UanScenario) -> UanStatus {
    guard(|| unsafe { write_out(out, Box::into_raw(Box::new(UanScenario(ScenarioConfig::default())))) })
}

/// Parses a JSON scenario; missing keys take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_from_json(json: *const c_char, out: *mut *mut UanScenario) -> UanStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text =
            unsafe { CStr::from_ptr(json) }.to_str().map_err(|e| Failure(UanStatus::InvalidUtf8, e.to_string()))?;
        let cfg = ScenarioConfig::from_json(text)?;
        unsafe { write_out(out, Box::into_raw(Box::new(UanScenario(cfg)))) }
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_free(scenario: *mut UanScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Serializes the scenario; free the result with [`uan_string_free`].
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_to_json(scenario: *const UanScenario, out: *mut *mut c_char) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow(scenario, "scenario") }?;
        unsafe { write_out(out, owned_string(s.0.to_json()?)?) }
    })
}

/// Hex SHA-256 of the scenario; free with [`uan_string_free`].
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_hash(scenario: *const UanScenario, out: *mut *mut c_char) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow(scenario, "scenario") }?;
        unsafe { write_out(out, owned_string(s.0.hash())?) }
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_scheme(scenario: *mut UanScenario, scheme: UanScheme) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.scheme = match scheme {
            UanScheme::UpaFixed => Scheme::UpaFixed,
            UanScheme::OrpUpa => Scheme::OrpUpa,
            UanScheme::OpaMidpoint => Scheme::OpaMidpoint,
            UanScheme::Joint => Scheme::Joint,
            UanScheme::Approx => Scheme::Approx,
        };
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_bands(scenario: *mut UanScenario, n: usize) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.n = n;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_trials(scenario: *mut UanScenario, trials: u64, seed: u64) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.trials = trials;
        s.0.seed = seed;
        Ok(())
    })
}

/// Sum-power budget in dB re μPa.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_budget_db(scenario: *mut UanScenario, budget_db: f64) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.budget_db = budget_db;
        Ok(())
    })
}

/// Outage threshold in bits/s.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_rate(scenario: *mut UanScenario, rate_bps: f64) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.rate_bps = rate_bps;
        Ok(())
    })
}

/// Constant channel gains for the two hops.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uan_scenario_set_gain_ratio(scenario: *mut UanScenario, c_sr: f64, c_rd: f64) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow_mut(scenario, "scenario") }?;
        s.0.gain_ratio = Some([c_sr, c_rd]);
        Ok(())
    })
}

/// Validates the scenario and runs its scheme.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_run(scenario: *const UanScenario, out: *mut *mut UanReport) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow(scenario, "scenario") }?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let report = scenario::run_scheme(&s.0)?;
        unsafe { write_out(out, Box::into_raw(Box::new(UanReport(report)))) }
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uan_report_free(report: *mut UanReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Relay distance from the source, km.
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_report_relay_km(report: *const UanReport, out: *mut f64) -> UanStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        unsafe { write_out(out, r.0.d_sr) }
    })
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_report_outage(report: *const UanReport, out: *mut UanOutage) -> UanStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        let o = &r.0.outage;
        unsafe {
            write_out(
                out,
                UanOutage { p_hat: o.p_hat, ci95_halfwidth: o.ci95_halfwidth, trials: o.trials, seed: o.seed },
            )
        }
    })
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_report_band_count(report: *const UanReport, out: *mut usize) -> UanStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        unsafe { write_out(out, r.0.bands.len()) }
    })
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_report_band(report: *const UanReport, index: usize, out: *mut UanBand) -> UanStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        let b =
            r.0.bands
                .get(index)
                .ok_or_else(|| Failure(UanStatus::OutOfRange, format!("band {index} of {}", r.0.bands.len())))?;
        unsafe { write_out(out, UanBand { f_khz: b.f_khz, p_s: b.p_s, p_r: b.p_r }) }
    })
}

/// Full report as JSON; free with [`uan_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_report_to_json(report: *const UanReport, out: *mut *mut c_char) -> UanStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        unsafe { write_out(out, owned_string(r.0.to_json()?)?) }
    })
}

/// Bordered-Hessian certificate at one operating point of the scenario's
/// environment and fading model.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uan_hessian_certificate(
    scenario: *const UanScenario,
    f_khz: f64,
    psd_source: f64,
    psd_relay: f64,
    relay_km: f64,
    out: *mut UanCertificate,
) -> UanStatus {
    guard(|| {
        let s = unsafe { borrow(scenario, "scenario") }?;
        s.0.validate()?;
        let fading = s.0.fading()?;
        let c = joint_opt::hessian_certificate(&s.0.resolved_env(), &fading, f_khz, psd_source, psd_relay, relay_km)?;
        let verdict = match c.verdict {
            Verdict::Pass => UanVerdict::Pass,
            Verdict::Fail => UanVerdict::Fail,
            Verdict::NotApplicable => UanVerdict::NotApplicable,
            Verdict::Inconclusive => UanVerdict::Inconclusive,
        };
        let cert = UanCertificate {
            det2: c.det2,
            det3: c.det3,
            det4: c.det4,
            closed_form_det3: c.closed_form_det3,
            step_disagreement: c.step_disagreement,
            verdict,
        };
        unsafe { write_out(out, cert) }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn uan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
