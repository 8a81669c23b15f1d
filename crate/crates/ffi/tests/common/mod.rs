#![allow(dead_code)]

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use airs::RolloutBatch;
use airs_ffi::*;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn last_error() -> String {
    let p = airs_last_error();
    assert!(!p.is_null(), "no error message set");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Owned module handle.
pub struct Reward(pub *mut AirsReward);

impl Reward {
    pub fn new(module: &str, obs_dim: usize, n_actions: usize, params: Option<&str>, seed: u64) -> Result<Self, (AirsStatus, String)> {
        let name = CString::new(module).unwrap();
        let params = params.map(|p| CString::new(p).unwrap());
        let mut h = ptr::null_mut();
        let status = unsafe {
            airs_reward_new(
                name.as_ptr(),
                obs_dim,
                n_actions,
                params.as_ref().map_or(ptr::null(), |p| p.as_ptr()),
                seed,
                &mut h,
            )
        };
        if status == AirsStatus::Ok {
            Ok(Reward(h))
        } else {
            Err((status, last_error()))
        }
    }

    pub fn compute(&mut self, r: &AirsRollout) -> Result<Vec<f32>, (AirsStatus, String)> {
        let mut out = vec![0f32; r.n_steps * r.n_envs];
        let status = unsafe { airs_reward_compute(self.0, r, out.as_mut_ptr(), out.len()) };
        if status == AirsStatus::Ok {
            Ok(out)
        } else {
            Err((status, last_error()))
        }
    }
}

impl Drop for Reward {
    fn drop(&mut self) {
        unsafe { airs_reward_free(self.0) };
    }
}

/// f32 buffers for one batch, kept alive while a rollout view points at them.
pub struct Buffers {
    pub n_steps: usize,
    pub n_envs: usize,
    pub obs_dim: usize,
    pub observations: Vec<f32>,
    pub actions: Vec<i64>,
    pub rewards: Vec<f32>,
    pub next_observations: Vec<f32>,
    pub dones: Vec<u8>,
    pub episode_ids: Vec<u64>,
}

impl Buffers {
    pub fn from_batch(b: &RolloutBatch) -> Self {
        let narrow = |v: &[f64]| v.iter().map(|&x| x as f32).collect();
        Buffers {
            n_steps: b.n_steps,
            n_envs: b.n_envs,
            obs_dim: b.obs_dim,
            observations: narrow(&b.observations),
            actions: b.actions.clone(),
            rewards: narrow(&b.extrinsic_rewards),
            next_observations: narrow(&b.next_observations),
            dones: b.dones.iter().map(|&d| u8::from(d)).collect(),
            episode_ids: b.episode_ids.clone(),
        }
    }

    /// The same batch after the round trip through f32.
    pub fn widened(&self) -> RolloutBatch {
        let widen = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect();
        RolloutBatch::new(
            self.n_steps,
            self.n_envs,
            vec![self.obs_dim],
            widen(&self.observations),
            self.actions.clone(),
            widen(&self.rewards),
            widen(&self.next_observations),
            self.dones.iter().map(|&d| d != 0).collect(),
            self.episode_ids.clone(),
        )
        .unwrap()
    }

    pub fn rollout(&self, with_ids: bool) -> AirsRollout {
        AirsRollout {
            n_steps: self.n_steps,
            n_envs: self.n_envs,
            obs_dim: self.obs_dim,
            observations: self.observations.as_ptr(),
            actions: self.actions.as_ptr(),
            rewards: self.rewards.as_ptr(),
            next_observations: self.next_observations.as_ptr(),
            dones: self.dones.as_ptr(),
            episode_ids: if with_ids { self.episode_ids.as_ptr() } else { ptr::null() },
        }
    }
}

/// Owned bandit handle.
pub struct Bandit(pub *mut AirsBandit);

impl Bandit {
    pub fn new(arms: &[&str], c: f64, window: usize) -> Result<Self, (AirsStatus, String)> {
        let names: Vec<CString> = arms.iter().map(|a| CString::new(*a).unwrap()).collect();
        let ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        let mut h = ptr::null_mut();
        let status = unsafe { airs_bandit_new(ptrs.as_ptr(), ptrs.len(), c, window, &mut h) };
        if status == AirsStatus::Ok {
            Ok(Bandit(h))
        } else {
            Err((status, last_error()))
        }
    }

    pub fn select(&self) -> usize {
        let mut arm = usize::MAX;
        assert_eq!(unsafe { airs_bandit_select(self.0, &mut arm) }, AirsStatus::Ok);
        arm
    }

    pub fn record(&mut self, arm: &str, value: f64) -> AirsStatus {
        let name = CString::new(arm).unwrap();
        unsafe { airs_bandit_record(self.0, name.as_ptr(), value) }
    }

    pub fn q(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN; unsafe { airs_bandit_n_arms(self.0) }];
        assert_eq!(unsafe { airs_bandit_q(self.0, out.as_mut_ptr(), out.len()) }, AirsStatus::Ok);
        out
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut out = vec![0; unsafe { airs_bandit_n_arms(self.0) }];
        assert_eq!(unsafe { airs_bandit_counts(self.0, out.as_mut_ptr(), out.len()) }, AirsStatus::Ok);
        out
    }

    pub fn window(&self, arm: usize) -> Vec<f64> {
        let mut out = vec![0.0; 64];
        let mut n = 0;
        assert_eq!(
            unsafe { airs_bandit_window(self.0, arm, out.as_mut_ptr(), out.len(), &mut n) },
            AirsStatus::Ok
        );
        out.truncate(n);
        out
    }
}

impl Drop for Bandit {
    fn drop(&mut self) {
        unsafe { airs_bandit_free(self.0) };
    }
}
