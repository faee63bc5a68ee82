//! C ABI for the nrmab library.
//!
//! Handles are opaque pointers created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`NrmabStatus`]; on anything but `NRMAB_OK` the calling thread's last
//! error message is set and can be read with [`nrmab_last_error_message`].
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`nrmab_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use nrmab::baselines::{build_policy, Policy, PolicyOptions};
use nrmab::dynamics::{reward, sample_step};
use nrmab::evaluation::{run_experiment, ExperimentConfig};
use nrmab::graph_model::{generate_synthetic, EdgeModel, SyntheticSpec};
use nrmab::rng::{stream, TAG_ENV, TAG_POLICY};
use nrmab::verify::{any_fail, run_checks, SuiteConfig};
use nrmab::{ActionSet, Instance, NrmabError, State};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrmabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    CapExceeded = 4,
    BufferTooSmall = 5,
    CheckFailed = 6,
    Panic = 7,
}

/// A validated problem instance.
pub struct NrmabInstance {
    inner: Arc<Instance>,
}

/// A policy bound to the instance it was built for.
pub struct NrmabPolicy {
    inner: Box<dyn Policy>,
    n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(NrmabStatus, String);

impl From<NrmabError> for Failure {
    fn from(e: NrmabError) -> Self {
        let status = match e {
            NrmabError::EnumerationCap { .. } | NrmabError::CombinatorialCap { .. } => {
                NrmabStatus::CapExceeded
            }
            _ => NrmabStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(NrmabStatus::InvalidArgument, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NrmabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, turning errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<NrmabStatus, Failure>) -> NrmabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            NrmabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            NrmabStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn instance_arg<'a>(p: *const NrmabInstance) -> Result<&'a NrmabInstance, Failure> {
    p.as_ref().ok_or_else(|| null("instance"))
}

unsafe fn state_arg(inst: &Instance, bits: *const u8, len: usize) -> Result<State, Failure> {
    if bits.is_null() {
        return Err(null("state"));
    }
    if len != inst.n() {
        return Err(Failure(
            NrmabStatus::InvalidArgument,
            format!("state has {len} entries, instance has {} nodes", inst.n()),
        ));
    }
    let raw = std::slice::from_raw_parts(bits, len);
    Ok(State::from_bits(
        &raw.iter().map(|&b| b != 0).collect::<Vec<_>>(),
    ))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output string pointer"));
    }
    let c = CString::new(text)
        .map_err(|_| Failure(NrmabStatus::InvalidArgument, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nrmab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn nrmab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a canonical instance document (JSON).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_from_json(
    json: *const c_char,
    out: *mut *mut NrmabInstance,
) -> NrmabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = Instance::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(NrmabInstance {
            inner: Arc::new(inst),
        }));
        Ok(NrmabStatus::Ok)
    })
}

/// Draws a contact-network style instance with exactly `edges` edges and
/// unit rewards.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_generate(
    n: usize,
    edges: usize,
    budget_k: usize,
    gamma: f64,
    cascade_weight: f64,
    seed: u64,
    out: *mut *mut NrmabInstance,
) -> NrmabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut spec = SyntheticSpec::contact_network(n, EdgeModel::Count(edges), budget_k, gamma);
        spec.cascade_weight = cascade_weight;
        let inst = generate_synthetic(&spec, seed)?;
        *out = Box::into_raw(Box::new(NrmabInstance {
            inner: Arc::new(inst),
        }));
        Ok(NrmabStatus::Ok)
    })
}

/// # Safety
/// `inst` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_free(inst: *mut NrmabInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Canonical JSON of the instance.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_to_json(
    inst: *const NrmabInstance,
    out: *mut *mut c_char,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        write_string(out, inst.inner.to_json())?;
        Ok(NrmabStatus::Ok)
    })
}

/// Node count; 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_num_nodes(inst: *const NrmabInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.n())
}

/// Edge count; 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_num_edges(inst: *const NrmabInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.edges().len())
}

/// Budget `k`; 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nrmab_instance_budget(inst: *const NrmabInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.budget())
}

/// `R(s)` for a 0/1 state vector of length `n`.
///
/// # Safety
/// `state` must point to `n` bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_reward(
    inst: *const NrmabInstance,
    state: *const u8,
    n: usize,
    out: *mut f64,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        let s = state_arg(&inst.inner, state, n)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = reward(&inst.inner, &s);
        Ok(NrmabStatus::Ok)
    })
}

/// Samples one transition plus cascade. The coins come from the
/// environment stream `(seed, index)`, the same stream the evaluation
/// harness uses for run `index`, so a call is reproducible.
///
/// # Safety
/// `state` and `next_state` must point to `n` bytes, `action` to
/// `action_len` node ids (it may be null when `action_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn nrmab_step(
    inst: *const NrmabInstance,
    state: *const u8,
    n: usize,
    action: *const u32,
    action_len: usize,
    seed: u64,
    index: u64,
    next_state: *mut u8,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        let s = state_arg(&inst.inner, state, n)?;
        let members: &[u32] = if action_len == 0 {
            &[]
        } else if action.is_null() {
            return Err(null("action"));
        } else {
            std::slice::from_raw_parts(action, action_len)
        };
        let a = ActionSet::new(members.iter().map(|&v| v as usize), n)?;
        inst.inner.check_action(&a)?;
        if next_state.is_null() {
            return Err(null("next_state"));
        }
        let (_, next) = sample_step(&inst.inner, &s, &a, &mut stream(seed, TAG_ENV, index));
        let out = std::slice::from_raw_parts_mut(next_state, n);
        for (v, slot) in out.iter_mut().enumerate() {
            *slot = next.get(v) as u8;
        }
        Ok(NrmabStatus::Ok)
    })
}

/// Builds a named policy. `options_json` may be null for defaults; `seed`
/// keys any training the policy performs.
///
/// # Safety
/// `inst` must be a live handle, `name` a NUL-terminated string,
/// `options_json` null or NUL-terminated, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_policy_new(
    inst: *const NrmabInstance,
    name: *const c_char,
    options_json: *const c_char,
    seed: u64,
    out: *mut *mut NrmabPolicy,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        let name = str_arg(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts: PolicyOptions = if options_json.is_null() {
            PolicyOptions::default()
        } else {
            serde_json::from_str(str_arg(options_json, "options_json")?)?
        };
        let policy = build_policy(name, inst.inner.clone(), &opts, seed)?;
        *out = Box::into_raw(Box::new(NrmabPolicy {
            inner: policy,
            n: inst.inner.n(),
        }));
        Ok(NrmabStatus::Ok)
    })
}

/// # Safety
/// `policy` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn nrmab_policy_free(policy: *mut NrmabPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Chooses an action set for `state`, writing sorted node ids into
/// `out_action`. Policy randomness comes from the stream `(seed, index)`.
/// Returns `NRMAB_BUFFER_TOO_SMALL` with `*out_len` set to the required
/// size when `capacity` is short.
///
/// # Safety
/// `state` must point to `n` bytes, `out_action` to `capacity` slots and
/// `out_len` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_policy_select(
    policy: *const NrmabPolicy,
    state: *const u8,
    n: usize,
    seed: u64,
    index: u64,
    out_action: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> NrmabStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        if state.is_null() {
            return Err(null("state"));
        }
        if n != policy.n {
            return Err(Failure(
                NrmabStatus::InvalidArgument,
                format!(
                    "state has {n} entries, policy was built for {} nodes",
                    policy.n
                ),
            ));
        }
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let raw = std::slice::from_raw_parts(state, n);
        let s = State::from_bits(&raw.iter().map(|&b| b != 0).collect::<Vec<_>>());
        let a = policy
            .inner
            .select(&s, &mut stream(seed, TAG_POLICY, index));
        *out_len = a.len();
        if a.len() > capacity {
            return Err(Failure(
                NrmabStatus::BufferTooSmall,
                format!("action has {} members, buffer holds {capacity}", a.len()),
            ));
        }
        if !a.is_empty() {
            if out_action.is_null() {
                return Err(null("out_action"));
            }
            let out = std::slice::from_raw_parts_mut(out_action, a.len());
            for (slot, &v) in out.iter_mut().zip(a.members()) {
                *slot = v as u32;
            }
        }
        Ok(NrmabStatus::Ok)
    })
}

/// Runs an experiment described by `config_json` (policies, seeds,
/// runs_per_seed, horizon, optional timing and options) and returns the
/// summary document.
///
/// # Safety
/// `inst` must be a live handle, `config_json` NUL-terminated and
/// `out_summary_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_evaluate(
    inst: *const NrmabInstance,
    config_json: *const c_char,
    out_summary_json: *mut *mut c_char,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        let cfg: ExperimentConfig = serde_json::from_str(str_arg(config_json, "config_json")?)?;
        let experiment = run_experiment(inst.inner.clone(), &cfg)?;
        write_string(
            out_summary_json,
            serde_json::to_string(&experiment.summary)?,
        )?;
        Ok(NrmabStatus::Ok)
    })
}

/// Runs every theory check on the instance with the default suite settings
/// and `seed`. The report array is written even when a check fails, in
/// which case the status is `NRMAB_CHECK_FAILED`.
///
/// # Safety
/// `inst` must be a live handle and `out_report_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nrmab_verify(
    inst: *const NrmabInstance,
    seed: u64,
    out_report_json: *mut *mut c_char,
) -> NrmabStatus {
    guard(|| {
        let inst = instance_arg(inst)?;
        let cfg = SuiteConfig {
            seed,
            ..SuiteConfig::default()
        };
        let reports = run_checks("instance", &inst.inner, &cfg);
        write_string(out_report_json, serde_json::to_string(&reports)?)?;
        if any_fail(&reports) {
            set_error("at least one theory check failed");
            Ok(NrmabStatus::CheckFailed)
        } else {
            Ok(NrmabStatus::Ok)
        }
    })
}
