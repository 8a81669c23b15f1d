//! C ABI over the reward modules and the UCB bandit.
//!
//! Every function returns an [`AirsStatus`]. On failure a message is kept per
//! thread and can be read with [`airs_last_error`] until the next call on the
//! same thread. Handles are opaque and must be released with their `_free`
//! function. A handle may move between threads but must not be used from two
//! threads at once.
//!
//! Arrays cross the boundary as contiguous row-major buffers. Observations are
//! `float` with shape `(n_steps, n_envs, obs_dim)`, per-row arrays have shape
//! `(n_steps, n_envs)`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use airs::bandit::Bandit;
use airs::rewards::{build, IntrinsicReward, RewardKind, RewardParams};
use airs::{Error, RolloutBatch};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AirsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NotFound = 4,
    Shape = 5,
    Numeric = 6,
    State = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for AirsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Shape(_) => AirsStatus::Shape,
            Error::NotFound(_) => AirsStatus::NotFound,
            Error::State(_) => AirsStatus::State,
            Error::Config { .. } | Error::Format(_) => AirsStatus::Config,
            Error::Argument(_) => AirsStatus::InvalidArgument,
            Error::Numeric(_) => AirsStatus::Numeric,
            Error::Io(_) => AirsStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(AirsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AirsStatus::NullPointer, format!("missing {what}: null pointer"))
}

/// Run `f`, translating errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AirsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AirsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AirsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller promises a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(AirsStatus::InvalidArgument, format!("{what}: not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller promises `len` readable elements.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn out_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller promises `len` writable elements.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn airs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn airs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Borrowed view of one rollout. `dones` and `episode_ids` may be NULL; the
/// others are required.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AirsRollout {
    pub n_steps: usize,
    pub n_envs: usize,
    pub obs_dim: usize,
    /// `n_steps * n_envs * obs_dim` values.
    pub observations: *const f32,
    /// `n_steps * n_envs` values.
    pub actions: *const i64,
    /// `n_steps * n_envs` extrinsic rewards.
    pub rewards: *const f32,
    /// `n_steps * n_envs * obs_dim` values.
    pub next_observations: *const f32,
    /// `n_steps * n_envs` flags, nonzero for a terminal step. NULL means none.
    pub dones: *const u8,
    /// `n_steps * n_envs` episode ids. NULL derives them from `dones`,
    /// continuing the per-env count from the previous call.
    pub episode_ids: *const u64,
}

/// Opaque reward module.
pub struct AirsReward {
    module: Box<dyn IntrinsicReward>,
    obs_dim: usize,
    next_episode: Vec<u64>,
}

impl AirsReward {
    unsafe fn batch(&mut self, r: &AirsRollout) -> Result<RolloutBatch, Failure> {
        if r.obs_dim != self.obs_dim {
            return Err(Failure(
                AirsStatus::Shape,
                format!("observations: width {} but the module expects {}", r.obs_dim, self.obs_dim),
            ));
        }
        let rows = r.n_steps * r.n_envs;
        if rows == 0 {
            return Err(Failure(AirsStatus::Shape, "rollout: n_steps and n_envs must be positive".into()));
        }
        let widen = |s: &[f32]| s.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
        // SAFETY: lengths follow from the shape fields the caller filled in.
        let (obs, actions, rewards, next) = unsafe {
            (
                slice_arg(r.observations, rows * r.obs_dim, "observations")?,
                slice_arg(r.actions, rows, "actions")?,
                slice_arg(r.rewards, rows, "rewards")?,
                slice_arg(r.next_observations, rows * r.obs_dim, "next_observations")?,
            )
        };
        let dones: Vec<bool> = if r.dones.is_null() {
            vec![false; rows]
        } else {
            // SAFETY: as above.
            unsafe { slice::from_raw_parts(r.dones, rows) }.iter().map(|&d| d != 0).collect()
        };
        if self.next_episode.len() != r.n_envs {
            self.next_episode = vec![0; r.n_envs];
        }
        let ids = if r.episode_ids.is_null() {
            RolloutBatch::episode_ids_from_dones(r.n_steps, r.n_envs, &dones, &self.next_episode)
        } else {
            // SAFETY: as above.
            unsafe { slice::from_raw_parts(r.episode_ids, rows) }.to_vec()
        };
        let batch = RolloutBatch::new(
            r.n_steps,
            r.n_envs,
            vec![r.obs_dim],
            widen(obs),
            actions.to_vec(),
            widen(rewards),
            widen(next),
            dones,
            ids,
        )?;
        for (env, s) in self.next_episode.iter_mut().enumerate() {
            let last = (r.n_steps - 1) * r.n_envs + env;
            *s = batch.episode_ids[last] + u64::from(batch.dones[last]);
        }
        Ok(batch)
    }
}

/// Build a reward module by name (`id`, `re3`, `rise`, `revd`, `ride`,
/// `pseudo_counts`, `icm`, `rnd`, `ngu`). `params_json` is a JSON object of
/// hyperparameters overriding the defaults, or NULL.
///
/// # Safety
/// `module` and a non-NULL `params_json` must be NUL-terminated strings and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn airs_reward_new(
    module: *const c_char,
    obs_dim: usize,
    n_actions: usize,
    params_json: *const c_char,
    seed: u64,
    out: *mut *mut AirsReward,
) -> AirsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: see the function contract.
        let kind: RewardKind = unsafe { str_arg(module, "module")? }.parse()?;
        let params: RewardParams = if params_json.is_null() {
            RewardParams::default()
        } else {
            // SAFETY: as above.
            let text = unsafe { str_arg(params_json, "params_json")? };
            serde_json::from_str(text).map_err(|e| Failure(AirsStatus::Config, format!("params_json: {e}")))?
        };
        if obs_dim == 0 || n_actions == 0 {
            return Err(Failure(AirsStatus::InvalidArgument, "obs_dim and n_actions must be positive".into()));
        }
        let h = AirsReward {
            module: build(kind, obs_dim, n_actions, &params, seed)?,
            obs_dim,
            next_episode: Vec::new(),
        };
        // SAFETY: checked non-NULL above.
        unsafe { *out = Box::into_raw(Box::new(h)) };
        Ok(())
    })
}

/// Release a module. NULL is ignored.
///
/// # Safety
/// `h` must come from [`airs_reward_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn airs_reward_free(h: *mut AirsReward) {
    if !h.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Intrinsic rewards for one rollout, written to `out` (`out_len` must equal
/// `n_steps * n_envs`). Stateful modules update as a side effect.
///
/// # Safety
/// `h` must be a live handle, `rollout` must point to a rollout whose buffers
/// match its shape fields, and `out` must hold `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn airs_reward_compute(
    h: *mut AirsReward,
    rollout: *const AirsRollout,
    out: *mut f32,
    out_len: usize,
) -> AirsStatus {
    guard(|| {
        if h.is_null() {
            return Err(null("handle"));
        }
        if rollout.is_null() {
            return Err(null("rollout"));
        }
        // SAFETY: see the function contract.
        let (h, r) = unsafe { (&mut *h, &*rollout) };
        let rows = r.n_steps * r.n_envs;
        if out_len != rows {
            return Err(Failure(AirsStatus::Shape, format!("out: length {out_len}, expected {rows}")));
        }
        // SAFETY: as above.
        let out = unsafe { out_arg(out, out_len, "out")? };
        let batch = unsafe { h.batch(r)? };
        let rewards = h.module.compute(&batch)?;
        for (o, v) in out.iter_mut().zip(rewards) {
            *o = v as f32;
        }
        Ok(())
    })
}

/// Forget episodic state and restart the derived episode ids.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn airs_reward_reset(h: *mut AirsReward) -> AirsStatus {
    guard(|| {
        if h.is_null() {
            return Err(null("handle"));
        }
        // SAFETY: see the function contract.
        let h = unsafe { &mut *h };
        h.module.reset();
        h.next_episode.clear();
        Ok(())
    })
}

/// Opaque UCB bandit.
pub struct AirsBandit {
    inner: Bandit,
}

/// Bandit over `n_arms` named arms with exploration constant `c` and a return
/// window of `window` entries per arm.
///
/// # Safety
/// `arms` must hold `n_arms` NUL-terminated strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_new(
    arms: *const *const c_char,
    n_arms: usize,
    c: f64,
    window: usize,
    out: *mut *mut AirsBandit,
) -> AirsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: see the function contract.
        let ptrs = unsafe { slice_arg(arms, n_arms, "arms")? };
        let names = ptrs
            .iter()
            .enumerate()
            .map(|(i, &p)| unsafe { str_arg(p, &format!("arms[{i}]")) })
            .collect::<Result<Vec<_>, _>>()?;
        let inner = Bandit::new(names, c, window)?;
        // SAFETY: checked non-NULL above.
        unsafe { *out = Box::into_raw(Box::new(AirsBandit { inner })) };
        Ok(())
    })
}

/// Release a bandit. NULL is ignored.
///
/// # Safety
/// `h` must come from [`airs_bandit_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_free(h: *mut AirsBandit) {
    if !h.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(h) });
    }
}

unsafe fn bandit_ref<'a>(h: *const AirsBandit) -> Result<&'a AirsBandit, Failure> {
    if h.is_null() {
        return Err(null("handle"));
    }
    // SAFETY: caller promises a live handle.
    Ok(unsafe { &*h })
}

unsafe fn bandit_mut<'a>(h: *mut AirsBandit) -> Result<&'a mut AirsBandit, Failure> {
    if h.is_null() {
        return Err(null("handle"));
    }
    // SAFETY: caller promises a live, unaliased handle.
    Ok(unsafe { &mut *h })
}

/// Number of arms, or 0 for NULL.
///
/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_n_arms(h: *const AirsBandit) -> usize {
    if h.is_null() {
        0
    } else {
        // SAFETY: see the function contract.
        unsafe { &*h }.inner.arms().len()
    }
}

/// Index of the arm with the highest upper confidence bound; ties go to the
/// lowest index.
///
/// # Safety
/// `h` must be a live handle and `arm` writable.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_select(h: *const AirsBandit, arm: *mut usize) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_ref(h)? };
        let out = unsafe { out_arg(arm, 1, "arm")? };
        out[0] = b.inner.select();
        Ok(())
    })
}

/// Record the mean episodic return observed after pulling the named arm.
///
/// # Safety
/// `h` must be a live handle and `arm` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_record(h: *mut AirsBandit, arm: *const c_char, mean_return: f64) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_mut(h)? };
        let name = unsafe { str_arg(arm, "arm")? };
        b.inner.record(name, mean_return)?;
        Ok(())
    })
}

/// Record by arm index.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_record_index(h: *mut AirsBandit, arm: usize, mean_return: f64) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_mut(h)? };
        b.inner.record_index(arm, mean_return)?;
        Ok(())
    })
}

/// Copy the per-arm value estimates into `out` (`len` = number of arms).
///
/// # Safety
/// `h` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_q(h: *const AirsBandit, out: *mut f64, len: usize) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_ref(h)? };
        let q = b.inner.q();
        check_len(len, q.len())?;
        unsafe { out_arg(out, len, "out")? }.copy_from_slice(q);
        Ok(())
    })
}

/// Copy the per-arm selection counts into `out` (`len` = number of arms).
///
/// # Safety
/// `h` must be a live handle and `out` hold `len` integers.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_counts(h: *const AirsBandit, out: *mut u64, len: usize) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_ref(h)? };
        let n = b.inner.counts();
        check_len(len, n.len())?;
        unsafe { out_arg(out, len, "out")? }.copy_from_slice(n);
        Ok(())
    })
}

/// Copy the stored returns of `arm`, oldest first, into `out` (capacity
/// `cap`). The number written goes to `written`.
///
/// # Safety
/// `h` must be a live handle, `out` hold `cap` doubles and `written` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn airs_bandit_window(
    h: *const AirsBandit,
    arm: usize,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> AirsStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let b = unsafe { bandit_ref(h)? };
        let n_arms = b.inner.arms().len();
        if arm >= n_arms {
            return Err(Failure(AirsStatus::NotFound, format!("arm index {arm} out of range for {n_arms} arms")));
        }
        let w = b.inner.window(arm);
        if cap < w.len() {
            return Err(Failure(AirsStatus::Shape, format!("out: capacity {cap}, window holds {}", w.len())));
        }
        let written = unsafe { out_arg(written, 1, "written")? };
        if !w.is_empty() {
            let out = unsafe { out_arg(out, cap, "out")? };
            for (o, &v) in out.iter_mut().zip(w) {
                *o = v;
            }
        }
        written[0] = w.len();
        Ok(())
    })
}

fn check_len(got: usize, want: usize) -> Result<(), Failure> {
    if got != want {
        return Err(Failure(AirsStatus::Shape, format!("out: length {got}, expected {want}")));
    }
    Ok(())
}
