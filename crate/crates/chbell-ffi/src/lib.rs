//! C ABI for the `chbell` library.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`ChbellStatus`]; results go through
//!   out-pointers. `CHBELL_STATUS_OK` (0) means success.
//! * On failure, a thread-local message is available via
//!   [`chbell_last_error`] until the next failing call on the same thread.
//! * Ensembles are opaque [`ChbellEnsemble`] handles created by
//!   `chbell_attack_build` or `chbell_ensemble_from_json` and released with
//!   `chbell_ensemble_free`. Strings returned by `chbell_ensemble_to_json`
//!   are released with `chbell_string_free`.
//!
//! The matching header lives at `include/chbell.h`; keep it in sync with the
//! exported symbols (the `header_lists_every_symbol` test checks this). With
//! the cbindgen tool available it can be regenerated via
//! `cbindgen --config cbindgen.toml --crate chbell-ffi --output include/chbell.h`.
//!
//! Pointer contract for every `unsafe` function below: out-pointers and
//! handles must either be null (reported as `CHBELL_STATUS_NULL_POINTER`) or
//! valid for the duration of the call; strings must be NUL-terminated.

#![allow(clippy::missing_safety_doc)] // the pointer contract above covers all of them

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};

use chbell::closed_form::{
    build_attack, ch_bound, ch_bound_delta, chsh_bound, critical_threshold, BoundResult,
    ConditionFlags, ThresholdKind,
};
use chbell::lhv::{
    ensemble_bell_value, validate_ensemble, Functional, LhvEnsemble, RandomnessBounds,
};
use chbell::oracle::{optimize_factorizable, optimize_general, Certificate};
use chbell::sim::{self, SimConfig};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChbellStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    ValidationFailed = 4,
    JsonError = 5,
    ComputationFailed = 6,
}

/// Closed-form bound: value, the bounds it was evaluated at, and the active
/// piecewise branch as a NUL-terminated label.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChbellBound {
    pub value: f64,
    pub p: f64,
    pub q: f64,
    pub branch: [c_char; 16],
}

/// Monte-Carlo summary: CH estimate, its standard error, and the ensemble's
/// exact CH value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChbellSimResult {
    pub j_estimate: f64,
    pub std_error: f64,
    pub j_exact: f64,
}

/// Opaque ensemble handle.
pub struct ChbellEnsemble(LhvEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let owned = CString::new(msg.to_string().replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(status: ChbellStatus, msg: impl std::fmt::Display) -> ChbellStatus {
    set_error(msg);
    status
}

fn status_for(err: &chbell::Error) -> ChbellStatus {
    use chbell::Error::*;
    match err {
        InfeasibleBounds(_)
        | DeltaOutOfRange(_)
        | TargetOutOfRange { .. }
        | InvalidParameter(_)
        | InvalidDistribution(_)
        | InsufficientTrials { .. } => ChbellStatus::InvalidArgument,
        AveragingViolated { .. } | EnsembleInvalid(_) | ZeroProbabilitySetting { .. } => {
            ChbellStatus::ValidationFailed
        }
        Json(_) => ChbellStatus::JsonError,
        LpInfeasible | Io(_) => ChbellStatus::ComputationFailed,
    }
}

fn condition_from(raw: c_int) -> Option<ConditionFlags> {
    match raw {
        0 => Some(ConditionFlags::GENERAL),
        1 => Some(ConditionFlags::FACTORIZABLE),
        2 => Some(ConditionFlags::NO_SIGNALING),
        3 => Some(ConditionFlags::NS_FACTORIZABLE),
        _ => None,
    }
}

fn functional_from(raw: c_int) -> Option<Functional> {
    match raw {
        0 => Some(Functional::Ch),
        1 => Some(Functional::Chsh),
        _ => None,
    }
}

fn threshold_kind_from(raw: c_int) -> Option<ThresholdKind> {
    match raw {
        0 => Some(ThresholdKind::PAtSmallQ),
        1 => Some(ThresholdKind::QAtLargeP),
        2 => Some(ThresholdKind::Delta),
        _ => None,
    }
}

fn fill_bound(out: &mut ChbellBound, bound: &BoundResult) {
    out.value = bound.value;
    out.p = bound.bounds_used.p;
    out.q = bound.bounds_used.q;
    out.branch = [0; 16];
    for (dst, src) in out.branch.iter_mut().zip(bound.branch.bytes()) {
        *dst = src as c_char;
    }
    out.branch[15] = 0;
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chbell_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread.
#[no_mangle]
pub extern "C" fn chbell_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Optimal CH value for local models at bounds (p, q) under `condition`.
#[no_mangle]
pub unsafe extern "C" fn chbell_ch_bound(
    condition: c_int,
    p: f64,
    q: f64,
    out: *mut ChbellBound,
) -> ChbellStatus {
    let Some(out) = out.as_mut() else {
        return fail(ChbellStatus::NullPointer, "out pointer is null");
    };
    let Some(cond) = condition_from(condition) else {
        return fail(ChbellStatus::InvalidArgument, "unknown condition code");
    };
    match RandomnessBounds::new(p, q) {
        Ok(rb) => {
            fill_bound(out, &ch_bound(cond, rb));
            ChbellStatus::Ok
        }
        Err(e) => fail(ChbellStatus::Infeasible, e),
    }
}

/// Optimal CHSH value; the no-signaling flag of `condition` is ignored.
#[no_mangle]
pub unsafe extern "C" fn chbell_chsh_bound(
    condition: c_int,
    p: f64,
    q: f64,
    out: *mut ChbellBound,
) -> ChbellStatus {
    let Some(out) = out.as_mut() else {
        return fail(ChbellStatus::NullPointer, "out pointer is null");
    };
    let Some(cond) = condition_from(condition) else {
        return fail(ChbellStatus::InvalidArgument, "unknown condition code");
    };
    match RandomnessBounds::new(p, q) {
        Ok(rb) => {
            fill_bound(out, &chsh_bound(cond, rb));
            ChbellStatus::Ok
        }
        Err(e) => fail(ChbellStatus::Infeasible, e),
    }
}

/// Optimal CH value at symmetric deviation delta.
#[no_mangle]
pub unsafe extern "C" fn chbell_ch_bound_delta(
    condition: c_int,
    delta: f64,
    out_value: *mut f64,
) -> ChbellStatus {
    let Some(out) = out_value.as_mut() else {
        return fail(ChbellStatus::NullPointer, "out pointer is null");
    };
    let Some(cond) = condition_from(condition) else {
        return fail(ChbellStatus::InvalidArgument, "unknown condition code");
    };
    match ch_bound_delta(cond, delta) {
        Ok(v) => {
            *out = v;
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}

/// Invert a closed form: the critical P (kind 0), Q (kind 1), or delta
/// (kind 2) at which it reaches `j_target`.
#[no_mangle]
pub unsafe extern "C" fn chbell_critical_threshold(
    condition: c_int,
    kind: c_int,
    j_target: f64,
    out_value: *mut f64,
) -> ChbellStatus {
    let Some(out) = out_value.as_mut() else {
        return fail(ChbellStatus::NullPointer, "out pointer is null");
    };
    let (Some(cond), Some(kind)) = (condition_from(condition), threshold_kind_from(kind)) else {
        return fail(ChbellStatus::InvalidArgument, "unknown condition or kind");
    };
    match critical_threshold(cond, kind, j_target) {
        Ok(v) => {
            *out = v;
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}

/// Build the achieving ensemble for a condition at bounds (p, q).
/// Returns null on failure; see `chbell_last_error`.
#[no_mangle]
pub extern "C" fn chbell_attack_build(condition: c_int, p: f64, q: f64) -> *mut ChbellEnsemble {
    let Some(cond) = condition_from(condition) else {
        set_error("unknown condition code");
        return std::ptr::null_mut();
    };
    let rb = match RandomnessBounds::new(p, q) {
        Ok(rb) => rb,
        Err(e) => {
            set_error(e);
            return std::ptr::null_mut();
        }
    };
    match build_attack(cond, rb) {
        Ok(attack) => Box::into_raw(Box::new(ChbellEnsemble(attack.ensemble))),
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// Parse an ensemble from its JSON interchange form.
/// Returns null on failure; see `chbell_last_error`.
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_from_json(json: *const c_char) -> *mut ChbellEnsemble {
    if json.is_null() {
        set_error("json pointer is null");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(e) => {
            set_error(e);
            return std::ptr::null_mut();
        }
    };
    match serde_json::from_str::<LhvEnsemble>(text) {
        Ok(e) => Box::into_raw(Box::new(ChbellEnsemble(e))),
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// Serialize an ensemble to JSON. Free the result with `chbell_string_free`.
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_to_json(ensemble: *const ChbellEnsemble) -> *mut c_char {
    let Some(handle) = ensemble.as_ref() else {
        set_error("ensemble pointer is null");
        return std::ptr::null_mut();
    };
    match serde_json::to_string(&handle.0) {
        Ok(s) => CString::new(s)
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        Err(e) => {
            set_error(e);
            std::ptr::null_mut()
        }
    }
}

/// Release a string produced by this library.
///
/// # Safety
/// `s` must have been returned by `chbell_ensemble_to_json` and not freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn chbell_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release an ensemble handle.
///
/// # Safety
/// `ensemble` must have been returned by this library and not freed already.
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_free(ensemble: *mut ChbellEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Number of atoms in an ensemble (0 for null).
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_atom_count(ensemble: *const ChbellEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |h| h.0.atoms.len())
}

/// Exact Bell value of an ensemble (functional 0 = CH, 1 = CHSH). Fails with
/// `CHBELL_STATUS_VALIDATION_FAILED` if the averaging constraint is broken.
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_bell_value(
    ensemble: *const ChbellEnsemble,
    functional: c_int,
    out_value: *mut f64,
) -> ChbellStatus {
    let (Some(handle), Some(out)) = (ensemble.as_ref(), out_value.as_mut()) else {
        return fail(ChbellStatus::NullPointer, "null pointer argument");
    };
    let Some(functional) = functional_from(functional) else {
        return fail(ChbellStatus::InvalidArgument, "unknown functional code");
    };
    match ensemble_bell_value(&handle.0, functional) {
        Ok(v) => {
            *out = v;
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}

/// Check an ensemble against bounds (p, q). `CHBELL_STATUS_OK` when every
/// constraint holds; otherwise `CHBELL_STATUS_VALIDATION_FAILED` with the
/// violation list in `chbell_last_error`.
#[no_mangle]
pub unsafe extern "C" fn chbell_ensemble_validate(
    ensemble: *const ChbellEnsemble,
    p: f64,
    q: f64,
) -> ChbellStatus {
    let Some(handle) = ensemble.as_ref() else {
        return fail(ChbellStatus::NullPointer, "ensemble pointer is null");
    };
    let rb = match RandomnessBounds::new(p, q) {
        Ok(rb) => rb,
        Err(e) => return fail(ChbellStatus::Infeasible, e),
    };
    let report = validate_ensemble(&handle.0, &rb);
    if report.passed() {
        ChbellStatus::Ok
    } else {
        fail(ChbellStatus::ValidationFailed, report)
    }
}

/// Run a seeded Monte-Carlo experiment on an ensemble.
#[no_mangle]
pub unsafe extern "C" fn chbell_simulate(
    ensemble: *const ChbellEnsemble,
    n_trials: u64,
    seed: u64,
    out: *mut ChbellSimResult,
) -> ChbellStatus {
    let (Some(handle), Some(out)) = (ensemble.as_ref(), out.as_mut()) else {
        return fail(ChbellStatus::NullPointer, "null pointer argument");
    };
    let cfg = SimConfig {
        n_trials,
        seed,
        ensemble: handle.0.clone(),
    };
    match sim::run(&cfg) {
        Ok(report) => {
            out.j_estimate = report.j_estimate;
            out.std_error = report.std_error;
            out.j_exact = report.j_exact;
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}

/// Exact oracle optimum over all ensembles feasible at (p, q).
#[no_mangle]
pub unsafe extern "C" fn chbell_oracle_general(
    functional: c_int,
    p: f64,
    q: f64,
    out_value: *mut f64,
) -> ChbellStatus {
    let Some(out) = out_value.as_mut() else {
        return fail(ChbellStatus::NullPointer, "out pointer is null");
    };
    let Some(functional) = functional_from(functional) else {
        return fail(ChbellStatus::InvalidArgument, "unknown functional code");
    };
    let rb = match RandomnessBounds::new(p, q) {
        Ok(rb) => rb,
        Err(e) => return fail(ChbellStatus::Infeasible, e),
    };
    match optimize_general(functional, rb) {
        Ok(r) => {
            *out = r.value;
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}

/// Grid-certified oracle optimum under the factorizable condition;
/// `out_error_bound` receives the certificate radius.
#[no_mangle]
pub unsafe extern "C" fn chbell_oracle_factorizable(
    functional: c_int,
    p: f64,
    q: f64,
    grid_n: usize,
    out_value: *mut f64,
    out_error_bound: *mut f64,
) -> ChbellStatus {
    let (Some(out), Some(out_err)) = (out_value.as_mut(), out_error_bound.as_mut()) else {
        return fail(ChbellStatus::NullPointer, "null pointer argument");
    };
    let Some(functional) = functional_from(functional) else {
        return fail(ChbellStatus::InvalidArgument, "unknown functional code");
    };
    let rb = match RandomnessBounds::new(p, q) {
        Ok(rb) => rb,
        Err(e) => return fail(ChbellStatus::Infeasible, e),
    };
    match optimize_factorizable(functional, rb, grid_n) {
        Ok(r) => {
            *out = r.value;
            *out_err = match r.certificate {
                Certificate::Exact => 0.0,
                Certificate::Grid { error_bound, .. } => error_bound,
            };
            ChbellStatus::Ok
        }
        Err(e) => fail(status_for(&e), e),
    }
}
