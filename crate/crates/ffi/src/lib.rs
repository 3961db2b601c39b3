//! C ABI for the mmshare simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns an
//! [`MmwStatus`] and stores a message retrievable with
//! [`mmw_last_error_message`] on the calling thread.

use mmshare::channel::{link_state_probs, pathloss_db, LinkState};
use mmshare::metrics::MetricsReport;
use mmshare::runner;
use mmshare::scenario::{AccessScheme, Carrier, ScenarioConfig};
use mmshare::seed::derive_seed;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Runtime = 5,
    NoData = 6,
    Panic = 7,
}

pub const MMW_SCHEME_HYBRID: u32 = 1;
pub const MMW_SCHEME_LICENSED: u32 = 2;
pub const MMW_SCHEME_POOLED: u32 = 4;
pub const MMW_SCHEME_ALL: u32 = 7;

pub const MMW_CARRIER_LOW: u32 = 0;
pub const MMW_CARRIER_HIGH: u32 = 1;

pub const MMW_STATE_LOS: u32 = 0;
pub const MMW_STATE_NLOS: u32 = 1;

/// Validated scenario.
pub struct MmwScenario {
    cfg: ScenarioConfig,
}

/// Pooled per-UE statistics of a finished run.
pub struct MmwReport {
    report: MetricsReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: MmwStatus, msg: impl Into<String>) -> MmwStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> MmwStatus) -> MmwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MmwStatus::Panic, "internal panic"),
    }
}

fn scheme_from_bit(bit: u32) -> Option<AccessScheme> {
    match bit {
        MMW_SCHEME_HYBRID => Some(AccessScheme::Hybrid),
        MMW_SCHEME_LICENSED => Some(AccessScheme::Licensed),
        MMW_SCHEME_POOLED => Some(AccessScheme::Pooled),
        _ => None,
    }
}

fn schemes_from_mask(mask: u32) -> Option<Vec<AccessScheme>> {
    if mask == 0 || mask & !MMW_SCHEME_ALL != 0 {
        return None;
    }
    Some(
        [MMW_SCHEME_HYBRID, MMW_SCHEME_LICENSED, MMW_SCHEME_POOLED]
            .into_iter()
            .filter(|b| mask & b != 0)
            .filter_map(scheme_from_bit)
            .collect(),
    )
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mmw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mmw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse and validate a TOML scenario. `toml` may be empty for defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmw_scenario_from_toml(toml: *const c_char, out: *mut *mut MmwScenario) -> MmwStatus {
    guarded(|| {
        if toml.is_null() || out.is_null() {
            return fail(MmwStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(MmwStatus::InvalidUtf8, "scenario text is not UTF-8");
        };
        match ScenarioConfig::from_toml(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(MmwScenario { cfg }));
                MmwStatus::Ok
            }
            Err(e) => fail(MmwStatus::Config, e.to_string()),
        }
    })
}

/// Release a scenario. NULL is ignored.
///
/// # Safety
/// `s` must come from [`mmw_scenario_from_toml`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mmw_scenario_free(s: *mut MmwScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Run the schemes in `scheme_mask` (`MMW_SCHEME_*` bits). `repetitions == 0`
/// uses the scenario's count; `threads == 0` uses all cores.
///
/// # Safety
/// `s` must be a live scenario and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmw_run(
    s: *const MmwScenario,
    scheme_mask: u32,
    seed: u64,
    repetitions: usize,
    threads: usize,
    out: *mut *mut MmwReport,
) -> MmwStatus {
    guarded(|| {
        if s.is_null() || out.is_null() {
            return fail(MmwStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Some(schemes) = schemes_from_mask(scheme_mask) else {
            return fail(MmwStatus::InvalidArgument, format!("invalid scheme mask {scheme_mask}"));
        };
        let cfg = &(*s).cfg;
        let reps = if repetitions == 0 { cfg.repetitions } else { repetitions };
        let threads = (threads > 0).then_some(threads);
        match runner::run_repetitions(cfg, &schemes, reps, seed, threads) {
            Ok(outputs) => {
                let report = runner::report(cfg, seed, &outputs);
                *out = Box::into_raw(Box::new(MmwReport { report }));
                MmwStatus::Ok
            }
            Err(e) => fail(MmwStatus::Runtime, e.to_string()),
        }
    })
}

unsafe fn stats<'a>(
    r: *const MmwReport,
    scheme: u32,
) -> Result<&'a mmshare::metrics::SchemeStats, MmwStatus> {
    if r.is_null() {
        return Err(fail(MmwStatus::NullPointer, "null report"));
    }
    let Some(s) = scheme_from_bit(scheme) else {
        return Err(fail(MmwStatus::InvalidArgument, format!("invalid scheme {scheme}")));
    };
    (*r).report
        .scheme(s)
        .ok_or_else(|| fail(MmwStatus::NoData, format!("scheme {s} was not run")))
}

/// Nearest-rank percentile `p` in [0, 100] of per-UE rates, bit/s.
///
/// # Safety
/// `r` must be a live report and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmw_report_percentile(r: *const MmwReport, scheme: u32, p: f64, out: *mut f64) -> MmwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MmwStatus::NullPointer, "null output");
        }
        match stats(r, scheme) {
            Ok(st) => match st.percentile(p) {
                Ok(v) => {
                    *out = v;
                    MmwStatus::Ok
                }
                Err(e) => fail(MmwStatus::InvalidArgument, e.to_string()),
            },
            Err(s) => s,
        }
    })
}

/// Mean per-UE rate, bit/s.
///
/// # Safety
/// `r` must be a live report and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmw_report_mean_rate(r: *const MmwReport, scheme: u32, out: *mut f64) -> MmwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MmwStatus::NullPointer, "null output");
        }
        match stats(r, scheme) {
            Ok(st) => match st.mean_rate() {
                Some(v) => {
                    *out = v;
                    MmwStatus::Ok
                }
                None => fail(MmwStatus::NoData, "no samples"),
            },
            Err(s) => s,
        }
    })
}

/// Number of pooled UE samples.
///
/// # Safety
/// `r` must be a live report and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmw_report_sample_count(r: *const MmwReport, scheme: u32, out: *mut usize) -> MmwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MmwStatus::NullPointer, "null output");
        }
        match stats(r, scheme) {
            Ok(st) => {
                *out = st.rates.len();
                MmwStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Copy up to `cap` sorted rates into `buf`; `total` receives the full count.
/// `buf` may be NULL when `cap` is 0.
///
/// # Safety
/// `buf` must hold `cap` doubles; `r` must be live; `total` writable.
#[no_mangle]
pub unsafe extern "C" fn mmw_report_rates(
    r: *const MmwReport,
    scheme: u32,
    buf: *mut f64,
    cap: usize,
    total: *mut usize,
) -> MmwStatus {
    guarded(|| {
        if total.is_null() || (buf.is_null() && cap > 0) {
            return fail(MmwStatus::NullPointer, "null output");
        }
        match stats(r, scheme) {
            Ok(st) => {
                let n = st.rates.len().min(cap);
                if n > 0 {
                    ptr::copy_nonoverlapping(st.rates.as_ptr(), buf, n);
                }
                *total = st.rates.len();
                MmwStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Release a report. NULL is ignored.
///
/// # Safety
/// `r` must come from [`mmw_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mmw_report_free(r: *mut MmwReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Outage, LOS and NLOS probabilities at `distance_m`, written to `out[0..3]`.
///
/// # Safety
/// `s` must be live and `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn mmw_link_state_probs(s: *const MmwScenario, distance_m: f64, out: *mut f64) -> MmwStatus {
    guarded(|| {
        if s.is_null() || out.is_null() {
            return fail(MmwStatus::NullPointer, "null argument");
        }
        match link_state_probs(distance_m, &(*s).cfg.channel) {
            Ok(p) => {
                let o = std::slice::from_raw_parts_mut(out, 3);
                o.copy_from_slice(&[p.outage, p.los, p.nlos]);
                MmwStatus::Ok
            }
            Err(e) => fail(MmwStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Median path loss (no shadowing) in dB on `carrier` in `state`.
///
/// # Safety
/// `s` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmw_pathloss_db(
    s: *const MmwScenario,
    carrier: u32,
    state: u32,
    distance_m: f64,
    out: *mut f64,
) -> MmwStatus {
    guarded(|| {
        if s.is_null() || out.is_null() {
            return fail(MmwStatus::NullPointer, "null argument");
        }
        let c = match carrier {
            MMW_CARRIER_LOW => Carrier::Low,
            MMW_CARRIER_HIGH => Carrier::High,
            _ => return fail(MmwStatus::InvalidArgument, format!("invalid carrier {carrier}")),
        };
        let st = match state {
            MMW_STATE_LOS => LinkState::Los,
            MMW_STATE_NLOS => LinkState::Nlos,
            _ => return fail(MmwStatus::InvalidArgument, format!("invalid link state {state}")),
        };
        match pathloss_db(distance_m, st, (*s).cfg.carrier(c), 0.0) {
            Ok(v) => {
                *out = v;
                MmwStatus::Ok
            }
            Err(e) => fail(MmwStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Child seed of `base` for one `(label, index)` pair; NULL label maps to "".
///
/// # Safety
/// `label` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmw_derive_seed(base: u64, label: *const c_char, index: u64) -> u64 {
    let l = if label.is_null() {
        String::new()
    } else {
        CStr::from_ptr(label).to_string_lossy().into_owned()
    };
    derive_seed(base, &[(l.as_str(), index)])
}
