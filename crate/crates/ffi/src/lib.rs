//! C ABI over the `iwocs` solvers.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/builder
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`IwocsStatus`]; on failure a message is available from
//! [`iwocs_last_error`] until the next failing call on the same thread.
//! Output arrays are caller-allocated; a too-small buffer yields
//! `IWOCS_STATUS_BUFFER_TOO_SMALL` and nothing is written.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use iwocs::envs::{self, GridMap, WindZone};
use iwocs::iwocs::{run_iwocs, IterationStatus, IwocsOptions, Searcher};
use iwocs::mdp::{
    default_max_iters, evaluate_policy_exact, greedy_policy, monte_carlo_return, value_iteration,
    DeterministicPolicy, TabularMdp,
};
use iwocs::robust::robust_value_iteration;
use iwocs::uncertainty::{rectangular_closure, DiscreteUncertaintySet, Generator, ModelFamily};
use iwocs::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IwocsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMdp = 3,
    NotConverged = 4,
    ParseError = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// How an IWOCS run ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IwocsRunStatus {
    Converged = 0,
    MaxIterations = 1,
    RepeatedWorstCase = 2,
}

/// Finite MDP handle.
pub struct IwocsMdp(TabularMdp);

/// Ordered list of structurally compatible MDPs.
pub struct IwocsModelSet {
    models: Vec<TabularMdp>,
}

/// Terminal numbers of an IWOCS run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IwocsRunSummary {
    /// Completed iterations.
    pub iterations: usize,
    pub status: i32,
    /// `Q_i(s0, pi_i(s0))` of the returned policy.
    pub candidate_value: f64,
    /// Adversarial value of the returned policy.
    pub worst_value: f64,
    /// Set index of the worst model.
    pub worst_index: usize,
    /// Standard Bellman backups spent in all inner solves.
    pub total_backups: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: IwocsStatus, msg: impl Into<String>) -> IwocsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> IwocsStatus {
    let status = match &e {
        Error::Usage(_) | Error::Config(_) => IwocsStatus::InvalidArgument,
        Error::InvalidMdp(_) => IwocsStatus::InvalidMdp,
        Error::NotConverged { .. } => IwocsStatus::NotConverged,
        Error::MapParse { .. } | Error::Json(_) | Error::Csv(_) => IwocsStatus::ParseError,
        Error::NonFiniteObjective { .. } | Error::Io(_) => IwocsStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Runs `body`, mapping errors and panics to status codes.
fn guard<F>(body: F) -> IwocsStatus
where
    F: FnOnce() -> Result<(), IwocsStatus>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IwocsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(IwocsStatus::Internal, "panic inside iwocs"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, IwocsStatus>;
}

impl<T> OrStatus<T> for iwocs::Result<T> {
    fn or_status(self) -> Result<T, IwocsStatus> {
        self.map_err(from_error)
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, IwocsStatus> {
    p.as_ref()
        .ok_or_else(|| fail(IwocsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, IwocsStatus> {
    if p.is_null() {
        return Err(fail(IwocsStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IwocsStatus::ParseError, format!("{name} is not UTF-8")))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    len: usize,
    need: usize,
    name: &str,
) -> Result<&'a mut [T], IwocsStatus> {
    if p.is_null() {
        return Err(fail(IwocsStatus::NullPointer, format!("{name} is null")));
    }
    if len < need {
        return Err(fail(
            IwocsStatus::BufferTooSmall,
            format!("{name} holds {len} entries, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn store<T>(p: *mut T, value: T) {
    if !p.is_null() {
        *p = value;
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iwocs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an MDP from its JSON document.
#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_from_json(
    json: *const c_char,
    out: *mut *mut IwocsMdp,
) -> IwocsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "out is null"));
        }
        let text = c_str(json, "json")?;
        let mdp = TabularMdp::from_json(text).or_status()?;
        *out = boxed(IwocsMdp(mdp));
        Ok(())
    })
}

/// Windy walk on the shipped map.
#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_windy_walk(alpha: f64, out: *mut *mut IwocsMdp) -> IwocsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "out is null"));
        }
        let mdp = envs::windy_walk(&envs::default_map(), alpha).or_status()?;
        *out = boxed(IwocsMdp(mdp));
        Ok(())
    })
}

/// Windy walk on a custom ASCII map. `zones` holds `n_zones` flattened
/// `(row, col, exponent)` triples and may be null when `n_zones` is 0.
#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_windy_walk_map(
    map_text: *const c_char,
    zones: *const u32,
    n_zones: usize,
    alpha: f64,
    out: *mut *mut IwocsMdp,
) -> IwocsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "out is null"));
        }
        let text = c_str(map_text, "map_text")?;
        let triples: &[u32] = if n_zones == 0 {
            &[]
        } else if zones.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "zones is null"));
        } else {
            std::slice::from_raw_parts(zones, 3 * n_zones)
        };
        let zones = triples
            .chunks_exact(3)
            .map(|z| WindZone {
                row: z[0] as usize,
                col: z[1] as usize,
                exponent: z[2],
            })
            .collect();
        let map = GridMap::parse(text, zones).or_status()?;
        *out = boxed(IwocsMdp(envs::windy_walk(&map, alpha).or_status()?));
        Ok(())
    })
}

/// Serializes an MDP to JSON. Free the result with [`iwocs_string_free`].
#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_to_json(
    mdp: *const IwocsMdp,
    out: *mut *mut c_char,
) -> IwocsStatus {
    guard(|| {
        let mdp = deref(mdp, "mdp")?;
        if out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "out is null"));
        }
        let text = mdp.0.to_json().or_status()?;
        *out = CString::new(text)
            .map_err(|_| fail(IwocsStatus::Internal, "JSON contains NUL"))?
            .into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_free(mdp: *mut IwocsMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Number of states, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_n_states(mdp: *const IwocsMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.0.n_states())
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_n_actions(mdp: *const IwocsMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.0.n_actions())
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_mdp_start_state(mdp: *const IwocsMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.0.start_state())
}

/// Value iteration from zero. Writes `n_states` values and, when
/// `policy_out` is non-null, the greedy policy. A `max_iters` of 0 selects
/// the default budget. Returns `IWOCS_STATUS_NOT_CONVERGED` (after writing
/// the last iterate) when the budget runs out.
#[no_mangle]
pub unsafe extern "C" fn iwocs_value_iteration(
    mdp: *const IwocsMdp,
    tol: f64,
    max_iters: usize,
    values_out: *mut f64,
    values_len: usize,
    policy_out: *mut u32,
    policy_len: usize,
    iterations_out: *mut usize,
) -> IwocsStatus {
    guard(|| {
        let mdp = &deref(mdp, "mdp")?.0;
        let n = mdp.n_states();
        let values = out_slice(values_out, values_len, n, "values_out")?;
        let policy = if policy_out.is_null() {
            None
        } else {
            Some(out_slice(policy_out, policy_len, n, "policy_out")?)
        };
        let budget = if max_iters == 0 {
            default_max_iters(tol, mdp.discount())
        } else {
            max_iters
        };
        let sol = value_iteration(mdp, tol, budget).or_status()?;
        values.copy_from_slice(sol.value.as_slice());
        if let Some(policy) = policy {
            for (o, a) in policy.iter_mut().zip(greedy_policy(&sol.q).0) {
                *o = a as u32;
            }
        }
        store(iterations_out, sol.iterations);
        if !sol.converged {
            return Err(from_error(sol.into_result().unwrap_err()));
        }
        Ok(())
    })
}

fn read_policy(
    mdp: &TabularMdp,
    policy: *const u32,
    len: usize,
) -> Result<DeterministicPolicy, IwocsStatus> {
    if policy.is_null() {
        return Err(fail(IwocsStatus::NullPointer, "policy is null"));
    }
    if len != mdp.n_states() {
        return Err(fail(
            IwocsStatus::InvalidArgument,
            format!("policy has {len} entries for {} states", mdp.n_states()),
        ));
    }
    // SAFETY: caller provides `len` readable entries.
    let raw = unsafe { std::slice::from_raw_parts(policy, len) };
    Ok(DeterministicPolicy(
        raw.iter().map(|&a| a as usize).collect(),
    ))
}

/// Exact evaluation of a deterministic policy; writes `n_states` values.
#[no_mangle]
pub unsafe extern "C" fn iwocs_evaluate_policy(
    mdp: *const IwocsMdp,
    policy: *const u32,
    policy_len: usize,
    tol: f64,
    values_out: *mut f64,
    values_len: usize,
) -> IwocsStatus {
    guard(|| {
        let mdp = &deref(mdp, "mdp")?.0;
        let policy = read_policy(mdp, policy, policy_len)?;
        let values = out_slice(values_out, values_len, mdp.n_states(), "values_out")?;
        let v = evaluate_policy_exact(mdp, &policy, tol).or_status()?;
        values.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Monte-Carlo estimate of the discounted return from the start state.
#[no_mangle]
pub unsafe extern "C" fn iwocs_monte_carlo_return(
    mdp: *const IwocsMdp,
    policy: *const u32,
    policy_len: usize,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
    mean_out: *mut f64,
    std_error_out: *mut f64,
) -> IwocsStatus {
    guard(|| {
        let mdp = &deref(mdp, "mdp")?.0;
        let policy = read_policy(mdp, policy, policy_len)?;
        let est = monte_carlo_return(mdp, &policy, n_rollouts, horizon, seed).or_status()?;
        store(mean_out, est.mean);
        store(std_error_out, est.std_error);
        Ok(())
    })
}

/// Empty model set.
#[no_mangle]
pub extern "C" fn iwocs_set_new() -> *mut IwocsModelSet {
    boxed(IwocsModelSet { models: Vec::new() })
}

/// Windy-walk models on a `grid_points`-point alpha grid over `[0, 0.5]`.
#[no_mangle]
pub unsafe extern "C" fn iwocs_set_windy_walk(
    grid_points: usize,
    out: *mut *mut IwocsModelSet,
) -> IwocsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "out is null"));
        }
        let family = envs::windy_walk_grid_family(&envs::default_map(), grid_points).or_status()?;
        let set = family.materialize().or_status()?;
        *out = boxed(IwocsModelSet {
            models: set.models().to_vec(),
        });
        Ok(())
    })
}

/// Appends a copy of `mdp`; it must match the shape of earlier members.
#[no_mangle]
pub unsafe extern "C" fn iwocs_set_push(
    set: *mut IwocsModelSet,
    mdp: *const IwocsMdp,
) -> IwocsStatus {
    guard(|| {
        let mdp = &deref(mdp, "mdp")?.0;
        let set = set
            .as_mut()
            .ok_or_else(|| fail(IwocsStatus::NullPointer, "set is null"))?;
        if let Some(first) = set.models.first() {
            if !first.same_structure(mdp) {
                return Err(fail(
                    IwocsStatus::InvalidArgument,
                    "model shape differs from the set",
                ));
            }
        }
        set.models.push(mdp.clone());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_set_len(set: *const IwocsModelSet) -> usize {
    set.as_ref().map_or(0, |s| s.models.len())
}

#[no_mangle]
pub unsafe extern "C" fn iwocs_set_free(set: *mut IwocsModelSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

fn as_discrete(set: &IwocsModelSet) -> Result<DiscreteUncertaintySet, IwocsStatus> {
    DiscreteUncertaintySet::from_models(set.models.clone()).or_status()
}

/// Robust value iteration over the rectangular closure of the set. Writes
/// `n_states` robust values.
#[no_mangle]
pub unsafe extern "C" fn iwocs_robust_value_iteration(
    set: *const IwocsModelSet,
    tol: f64,
    max_iters: usize,
    values_out: *mut f64,
    values_len: usize,
    iterations_out: *mut usize,
) -> IwocsStatus {
    guard(|| {
        let set = as_discrete(deref(set, "set")?)?;
        let values = out_slice(
            values_out,
            values_len,
            set.reference().n_states(),
            "values_out",
        )?;
        let budget = if max_iters == 0 {
            default_max_iters(tol, set.reference().discount())
        } else {
            max_iters
        };
        let report = robust_value_iteration(&rectangular_closure(&set).or_status()?, tol, budget)
            .or_status()?;
        values.copy_from_slice(report.robust_value.as_slice());
        store(iterations_out, report.iterations());
        if !report.converged {
            return Err(fail(
                IwocsStatus::NotConverged,
                "robust value iteration ran out of budget",
            ));
        }
        Ok(())
    })
}

/// IWOCS with exhaustive search over the set and exact evaluation, seeded
/// with member `t0_index`. Writes the candidate policy when `policy_out` is
/// non-null.
#[no_mangle]
pub unsafe extern "C" fn iwocs_run(
    set: *const IwocsModelSet,
    t0_index: usize,
    epsilon: f64,
    vi_tol: f64,
    max_iterations: usize,
    summary_out: *mut IwocsRunSummary,
    policy_out: *mut u32,
    policy_len: usize,
) -> IwocsStatus {
    guard(|| {
        let handle = deref(set, "set")?;
        let discrete = as_discrete(handle)?;
        if summary_out.is_null() {
            return Err(fail(IwocsStatus::NullPointer, "summary_out is null"));
        }
        if t0_index >= discrete.len() {
            return Err(fail(IwocsStatus::InvalidArgument, "t0_index out of range"));
        }
        let policy = if policy_out.is_null() {
            None
        } else {
            Some(out_slice(
                policy_out,
                policy_len,
                discrete.reference().n_states(),
                "policy_out",
            )?)
        };
        let models = Arc::new(handle.models.clone());
        let generator: Generator = Arc::new(move |p: &[f64]| {
            models
                .get(p[0] as usize)
                .cloned()
                .ok_or_else(|| Error::Usage(format!("no model at index {}", p[0])))
        });
        let family =
            ModelFamily::discrete("set", discrete.parameters().to_vec(), generator).or_status()?;
        let opts = IwocsOptions {
            t0: Some(vec![t0_index as f64]),
            max_iterations,
            epsilon,
            vi_tol,
            ..IwocsOptions::default()
        };
        let result = run_iwocs(&family, &Searcher::Grid(discrete), &opts).or_status()?;
        let status = match result.status() {
            IterationStatus::Converged | IterationStatus::Continue => IwocsRunStatus::Converged,
            IterationStatus::MaxIterations => IwocsRunStatus::MaxIterations,
            IterationStatus::RepeatedWorstCase => IwocsRunStatus::RepeatedWorstCase,
        };
        *summary_out = IwocsRunSummary {
            iterations: result.trace.len(),
            status: status as i32,
            candidate_value: result.candidate_value(),
            worst_value: result.worst_value,
            worst_index: result.worst_parameter[0] as usize,
            total_backups: result.total_backups(),
        };
        if let Some(policy) = policy {
            for (o, &a) in policy.iter_mut().zip(&result.policy().0) {
                *o = a as u32;
            }
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iwocs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
