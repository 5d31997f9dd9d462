//! C ABI over the `dbrp` planner.
//!
//! Instances and plans are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`DbrpStatus`]; on failure [`dbrp_last_error_message`] describes the
//! error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use dbrp::bench::{self, Algo};
use dbrp::expansion::ExpansionConfig;
use dbrp::io::{self, Instance, PlanDoc};
use dbrp::refine::RefineMode;
use dbrp::{Error, Plan};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON, invalid scene or plan, bad argument.
    InvalidInput = 3,
    NoPlanFound = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// A parsed scene: start state, goal and cost model.
pub struct DbrpInstance {
    inner: Instance,
}

pub struct DbrpPlan {
    inner: Plan,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: DbrpStatus, msg: impl Into<String>) -> DbrpStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> DbrpStatus {
    let status = match e {
        Error::NoPlanFound => DbrpStatus::NoPlanFound,
        _ => DbrpStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DbrpStatus) -> DbrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DbrpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(DbrpStatus::Internal, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, DbrpStatus> {
    if p.is_null() {
        return Err(fail(DbrpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(DbrpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            return fail(DbrpStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dbrp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn dbrp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a scene document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dbrp_instance_from_json(json: *const c_char, out: *mut *mut DbrpInstance) -> DbrpStatus {
    guard(|| {
        non_null!(out, "out");
        let text = try_status!(str_arg(json, "json"));
        match io::instance_from_str(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DbrpInstance { inner }));
                DbrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `inst` must come from [`dbrp_instance_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dbrp_instance_free(inst: *mut DbrpInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Plans `inst` with `algo` (`astar-ds`, `astar-ss`, `astar-ns`, `mcts-ds`
/// or `mcts-ns`) within `time_limit_s` seconds.
///
/// # Safety
/// Pointers must be valid; `algo` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan(
    inst: *const DbrpInstance,
    algo: *const c_char,
    time_limit_s: f64,
    seed: u64,
    out: *mut *mut DbrpPlan,
) -> DbrpStatus {
    guard(|| {
        non_null!(inst, "inst");
        non_null!(out, "out");
        let algo: Algo = match try_status!(str_arg(algo, "algo")).parse() {
            Ok(a) => a,
            Err(e) => return fail(DbrpStatus::InvalidInput, e),
        };
        if !(time_limit_s > 0.0 && time_limit_s.is_finite()) {
            return fail(DbrpStatus::InvalidInput, "time limit must be positive");
        }
        let inst = &(*inst).inner;
        let limit = Duration::from_secs_f64(time_limit_s);
        match bench::run_algo(algo, &inst.state, &inst.goal, &inst.cost, &ExpansionConfig::default(), limit, seed) {
            Ok(Some(inner)) => {
                *out = Box::into_raw(Box::new(DbrpPlan { inner }));
                DbrpStatus::Ok
            }
            Ok(None) => from_error(Error::NoPlanFound),
            Err(e) => from_error(e),
        }
    })
}

/// Parses a plan document and replays it from the instance start.
///
/// # Safety
/// Pointers must be valid; `json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan_from_json(
    inst: *const DbrpInstance,
    json: *const c_char,
    out: *mut *mut DbrpPlan,
) -> DbrpStatus {
    guard(|| {
        non_null!(inst, "inst");
        non_null!(out, "out");
        let text = try_status!(str_arg(json, "json"));
        let plan = io::parse::<PlanDoc>(text).and_then(|d| d.to_plan(&(*inst).inner));
        match plan {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DbrpPlan { inner }));
                DbrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `plan` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan_free(plan: *mut DbrpPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Number of actions, or 0 for a null handle.
///
/// # Safety
/// `plan` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan_len(plan: *const DbrpPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.inner.len())
}

/// Total cost including the return home, or NaN for a null handle.
///
/// # Safety
/// `plan` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan_cost(plan: *const DbrpPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.inner.total_cost)
}

/// Serializes a plan. Free the string with [`dbrp_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbrp_plan_to_json(
    inst: *const DbrpInstance,
    plan: *const DbrpPlan,
    out: *mut *mut c_char,
) -> DbrpStatus {
    guard(|| {
        non_null!(inst, "inst");
        non_null!(plan, "plan");
        non_null!(out, "out");
        let doc = PlanDoc::from_plan(&(*plan).inner, &(*inst).inner.state);
        match CString::new(io::to_json(&doc)) {
            Ok(s) => {
                *out = s.into_raw();
                DbrpStatus::Ok
            }
            Err(_) => fail(DbrpStatus::Internal, "plan JSON contains NUL"),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dbrp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Prunes and buffer-optimizes `plan`; `mode` is `static` or `dynamic`.
///
/// # Safety
/// Pointers must be valid; `mode` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dbrp_refine(
    inst: *const DbrpInstance,
    plan: *const DbrpPlan,
    mode: *const c_char,
    out: *mut *mut DbrpPlan,
) -> DbrpStatus {
    guard(|| {
        non_null!(inst, "inst");
        non_null!(plan, "plan");
        non_null!(out, "out");
        let mode: RefineMode = match try_status!(str_arg(mode, "mode")).parse() {
            Ok(m) => m,
            Err(e) => return fail(DbrpStatus::InvalidInput, e),
        };
        let inst = &(*inst).inner;
        match dbrp::refine::refine(&inst.state, &(*plan).inner, &inst.cost, mode) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DbrpPlan { inner }));
                DbrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Expected succeeded cost.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbrp_esc(avg_cost: f64, success_rate: f64, out: *mut f64) -> DbrpStatus {
    guard(|| {
        non_null!(out, "out");
        match bench::esc(avg_cost, success_rate) {
            Ok(v) => {
                *out = v;
                DbrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Mean of `len` ESC values.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dbrp_ops(values: *const f64, len: usize, out: *mut f64) -> DbrpStatus {
    guard(|| {
        non_null!(out, "out");
        let xs: &[f64] = if len == 0 {
            &[]
        } else {
            non_null!(values, "values");
            std::slice::from_raw_parts(values, len)
        };
        match bench::ops(xs) {
            Ok(v) => {
                *out = v;
                DbrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Percentage improvement of `ops_b` over `ops_a`.
#[no_mangle]
pub extern "C" fn dbrp_pir(ops_a: f64, ops_b: f64) -> f64 {
    bench::pir(ops_a, ops_b)
}
