//! C ABI over `cwlearn`.
//!
//! Every function returns a [`CwStatus`]; results come back through out
//! pointers. On failure the message is kept per thread and can be fetched
//! with [`cw_last_error_message`]. Strings returned to the caller must be
//! released with [`cw_string_free`], handles with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cwlearn::learner::{Learner, LearnerConfig};
use cwlearn::mac_sim::{BackoffPolicy, SimConfig, Simulator};
use cwlearn::workload::{active_count, generate_trace, load_trace, GenParams, Trace};
use cwlearn::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Undefined = 3,
    Parse = 4,
    Rejected = 5,
    NotReady = 6,
    Io = 7,
    Json = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

/// Simulator of saturated stations sharing one channel.
pub struct CwSimulator {
    sim: Simulator,
}

/// Online CW learner with its own exploration RNG.
pub struct CwLearner {
    learner: Learner,
    rng: ChaCha8Rng,
}

/// Per-second, per-station traffic volumes.
pub struct CwTrace {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CwStatus, msg: impl Into<String>) -> CwStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> CwStatus {
    let status = match &e {
        Error::Domain(_) => CwStatus::Domain,
        Error::Undefined(_) => CwStatus::Undefined,
        Error::Parse { .. } => CwStatus::Parse,
        Error::Rejected(_) => CwStatus::Rejected,
        Error::NotReady(_) => CwStatus::NotReady,
        Error::Io { .. } => CwStatus::Io,
        Error::Json(_) => CwStatus::Json,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CwStatus) -> CwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CwStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(CwStatus::Panic, "internal panic"),
    }
}

macro_rules! try_cw {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(CwStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Optional UTF-8 string; null maps to `None`.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, CwStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(CwStatus::InvalidUtf8, "string is not UTF-8"))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(s: Option<&str>) -> Result<T, CwStatus> {
    match s {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| from_error(Error::Json(e))),
    }
}

fn out_string(s: String, out: *mut *mut c_char) -> CwStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CwStatus::Ok
        }
        Err(_) => fail(CwStatus::Json, "output contained a nul byte"),
    }
}

/// Message for the last failed call on this thread, or null after a
/// success. Owned by the library; valid until the next call.
#[no_mangle]
pub extern "C" fn cw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned through an out pointer. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// ABA window for `actives` transmitters; 1 means no backoff.
///
/// # Safety
/// `out_cw` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_aba_cw(cw_min: u32, actives: u32, out_cw: *mut u32) -> CwStatus {
    guard(|| {
        non_null!(out_cw);
        let cw = try_cw!(cwlearn::models::aba_cw(cw_min, actives));
        *out_cw = cw.cw();
        CwStatus::Ok
    })
}

/// Jain fairness index of `n` throughputs.
///
/// # Safety
/// `xs` must point to `n` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_jain_index(xs: *const f64, n: usize, out: *mut f64) -> CwStatus {
    guard(|| {
        non_null!(xs, out);
        let v = std::slice::from_raw_parts(xs, n);
        *out = try_cw!(cwlearn::bench::jain_index(v));
        CwStatus::Ok
    })
}

/// New simulator from a JSON `SimConfig` (null for defaults); every
/// station starts active on BEB(15,63).
///
/// # Safety
/// `config_json` must be null or a nul-terminated string; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_simulator_new(config_json: *const c_char, out: *mut *mut CwSimulator) -> CwStatus {
    guard(|| {
        non_null!(out);
        let cfg: SimConfig = match opt_str(config_json).and_then(parse_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let sim = try_cw!(Simulator::uniform(cfg, BackoffPolicy::default_beb()));
        *out = Box::into_raw(Box::new(CwSimulator { sim }));
        CwStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a live handle from `cw_simulator_new`.
#[no_mangle]
pub unsafe extern "C" fn cw_simulator_free(sim: *mut CwSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Fixed window `cw` on every station; 0 restores BEB(15,63).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_simulator_set_cw_all(sim: *mut CwSimulator, cw: u32) -> CwStatus {
    guard(|| {
        non_null!(sim);
        let s = &mut (*sim).sim;
        let policy = if cw == 0 {
            BackoffPolicy::default_beb()
        } else {
            try_cw!(BackoffPolicy::fixed(cw))
        };
        for i in 0..s.stations().len() {
            try_cw!(s.set_policy(i, policy));
        }
        CwStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_simulator_set_active(sim: *mut CwSimulator, station: usize, active: bool) -> CwStatus {
    guard(|| {
        non_null!(sim);
        try_cw!((*sim).sim.set_active(station, active));
        CwStatus::Ok
    })
}

/// Simulate `seconds` and report the aggregate throughput in bit/s.
/// With `metrics_json` non-null, the full period metrics are also
/// returned as JSON (free with `cw_string_free`).
///
/// # Safety
/// `sim` must be a live handle; `out_tp_bps` valid for writes;
/// `metrics_json` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_simulator_run(
    sim: *mut CwSimulator,
    seconds: f64,
    out_tp_bps: *mut f64,
    metrics_json: *mut *mut c_char,
) -> CwStatus {
    guard(|| {
        non_null!(sim, out_tp_bps);
        if !(seconds > 0.0 && seconds.is_finite()) {
            return fail(CwStatus::Domain, "seconds must be positive");
        }
        let s = &mut (*sim).sim;
        let slots = s.config().slots_for_seconds(seconds);
        let m = try_cw!(s.run_period(slots));
        *out_tp_bps = m.aggregate_tp_bps;
        if !metrics_json.is_null() {
            let text = try_cw!(serde_json::to_string(&m).map_err(Error::Json));
            return out_string(text, metrics_json);
        }
        CwStatus::Ok
    })
}

/// New learner from a JSON `LearnerConfig` (null for defaults).
///
/// # Safety
/// `config_json` null or nul-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_new(config_json: *const c_char, seed: u64, out: *mut *mut CwLearner) -> CwStatus {
    guard(|| {
        non_null!(out);
        let cfg: LearnerConfig = match opt_str(config_json).and_then(parse_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let learner = try_cw!(Learner::new(cfg));
        *out = Box::into_raw(Box::new(CwLearner {
            learner,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }));
        CwStatus::Ok
    })
}

/// # Safety
/// `l` must be null or a live handle from `cw_learner_new`.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_free(l: *mut CwLearner) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// CW for the next period given the last period's actives and throughput.
///
/// # Safety
/// `l` live; `out_cw` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_next_cw(l: *mut CwLearner, actives: u32, tp_bps: f64, out_cw: *mut u32) -> CwStatus {
    guard(|| {
        non_null!(l, out_cw);
        let h = &mut *l;
        *out_cw = h.learner.next_cw(actives, tp_bps, &mut h.rng).cw;
        CwStatus::Ok
    })
}

/// Report the period that ran under the last `cw_learner_next_cw` choice.
///
/// # Safety
/// `l` live.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_observe(l: *mut CwLearner, actives: u32, tp_bps: f64) -> CwStatus {
    guard(|| {
        non_null!(l);
        try_cw!((*l).learner.observe_outcome(actives, tp_bps));
        CwStatus::Ok
    })
}

/// Model prediction without side effects; `NOT_READY` before any fit.
///
/// # Safety
/// `l` live; `out_cw` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_predict(l: *const CwLearner, actives: u32, tp_bps: f64, out_cw: *mut u32) -> CwStatus {
    guard(|| {
        non_null!(l, out_cw);
        match (*l).learner.predict(actives, tp_bps) {
            Some(cw) => {
                *out_cw = cw;
                CwStatus::Ok
            }
            None => fail(CwStatus::NotReady, "no model fitted yet"),
        }
    })
}

/// Queue sizes, table and model snapshot as JSON.
///
/// # Safety
/// `l` live; `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_learner_status_json(l: *const CwLearner, out_json: *mut *mut c_char) -> CwStatus {
    guard(|| {
        non_null!(l, out_json);
        let text = try_cw!(serde_json::to_string(&(*l).learner.status()).map_err(Error::Json));
        out_string(text, out_json)
    })
}

/// Load a trace CSV (`t` column then one column per station).
///
/// # Safety
/// `path` nul-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_trace_load(path: *const c_char, out: *mut *mut CwTrace) -> CwStatus {
    guard(|| {
        non_null!(path, out);
        let p = match opt_str(path) {
            Ok(p) => p.expect("checked non-null"),
            Err(s) => return s,
        };
        let trace = try_cw!(load_trace(Path::new(p)));
        *out = Box::into_raw(Box::new(CwTrace { trace }));
        CwStatus::Ok
    })
}

/// Generate a synthetic trace from JSON `GenParams` (null for defaults).
///
/// # Safety
/// `params_json` null or nul-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_trace_generate(params_json: *const c_char, out: *mut *mut CwTrace) -> CwStatus {
    guard(|| {
        non_null!(out);
        let params: GenParams = match opt_str(params_json).and_then(parse_json) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let trace = try_cw!(generate_trace(&params));
        *out = Box::into_raw(Box::new(CwTrace { trace }));
        CwStatus::Ok
    })
}

/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn cw_trace_free(t: *mut CwTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` live; out pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_trace_shape(t: *const CwTrace, out_stations: *mut usize, out_seconds: *mut usize) -> CwStatus {
    guard(|| {
        non_null!(t, out_stations, out_seconds);
        *out_stations = (*t).trace.n_stations();
        *out_seconds = (*t).trace.seconds();
        CwStatus::Ok
    })
}

/// Number of stations with traffic in second `t_index`.
///
/// # Safety
/// `t` live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cw_trace_active_count(t: *const CwTrace, t_index: usize, out: *mut u32) -> CwStatus {
    guard(|| {
        non_null!(t, out);
        *out = try_cw!(active_count(&(*t).trace, t_index));
        CwStatus::Ok
    })
}
