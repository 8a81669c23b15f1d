mod common;

use std::ffi::CStr;
use std::ptr;

use airs_ffi::*;
use common::{last_error, Buffers, Reward};

fn buffers(n_steps: usize, n_envs: usize, obs_dim: usize) -> Buffers {
    let rows = n_steps * n_envs;
    Buffers {
        n_steps,
        n_envs,
        obs_dim,
        observations: (0..rows * obs_dim).map(|i| (i % 7) as f32 * 0.5).collect(),
        actions: (0..rows as i64).map(|i| i % 3).collect(),
        rewards: vec![0.0; rows],
        next_observations: (0..rows * obs_dim).map(|i| (i % 5) as f32 * 0.25).collect(),
        dones: (0..rows).map(|i| u8::from(i % 4 == 3)).collect(),
        episode_ids: vec![0; rows],
    }
}

#[test]
fn identity_returns_zeros() {
    let mut m = Reward::new("id", 3, 3, None, 0).unwrap();
    let buf = buffers(5, 2, 3);
    assert_eq!(m.compute(&buf.rollout(false)).unwrap(), vec![0.0; 10]);
}

#[test]
fn re3_gives_finite_positive_rewards() {
    let mut m = Reward::new("re3", 3, 3, Some(r#"{"re3": {"k": 2}}"#), 7).unwrap();
    let buf = buffers(8, 2, 3);
    let r = m.compute(&buf.rollout(false)).unwrap();
    assert!(r.iter().all(|x| x.is_finite() && *x >= 0.0));
}

#[test]
fn missing_actions_names_the_key() {
    let mut m = Reward::new("re3", 3, 3, None, 0).unwrap();
    let buf = buffers(4, 2, 3);
    for (key, r) in [
        ("observations", AirsRollout { observations: ptr::null(), ..buf.rollout(false) }),
        ("actions", AirsRollout { actions: ptr::null(), ..buf.rollout(false) }),
        ("rewards", AirsRollout { rewards: ptr::null(), ..buf.rollout(false) }),
        ("next_observations", AirsRollout { next_observations: ptr::null(), ..buf.rollout(false) }),
    ] {
        let (status, msg) = m.compute(&r).unwrap_err();
        assert_eq!(status, AirsStatus::NullPointer);
        assert!(msg.contains(key), "{msg}");
    }
}

#[test]
fn shape_mismatch_names_the_key() {
    let mut m = Reward::new("re3", 4, 3, None, 0).unwrap();
    let buf = buffers(4, 2, 3);
    let (status, msg) = m.compute(&buf.rollout(false)).unwrap_err();
    assert_eq!(status, AirsStatus::Shape);
    assert!(msg.contains("observations"), "{msg}");

    let m = Reward::new("re3", 3, 3, None, 0).unwrap();
    let mut out = [0f32; 3];
    let status = unsafe { airs_reward_compute(m.0, &buf.rollout(false), out.as_mut_ptr(), out.len()) };
    assert_eq!(status, AirsStatus::Shape);
    assert!(last_error().contains("out"));
}

#[test]
fn bad_construction_inputs() {
    let (status, msg) = Reward::new("curiosity", 3, 3, None, 0).err().unwrap();
    assert_eq!(status, AirsStatus::NotFound);
    assert!(msg.contains("curiosity"), "{msg}");
    let (status, msg) = Reward::new("re3", 3, 3, Some(r#"{"re3": {"kk": 2}}"#), 0).err().unwrap();
    assert_eq!(status, AirsStatus::Config);
    assert!(msg.contains("params_json"), "{msg}");
    let (status, _) = Reward::new("re3", 0, 3, None, 0).err().unwrap();
    assert_eq!(status, AirsStatus::InvalidArgument);
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { airs_reward_new(ptr::null(), 3, 3, ptr::null(), 0, &mut h) },
        AirsStatus::NullPointer
    );
    assert!(last_error().contains("module"));
}

#[test]
fn null_handles_are_rejected() {
    let buf = buffers(2, 1, 3);
    let mut out = [0f32; 2];
    assert_eq!(
        unsafe { airs_reward_compute(ptr::null_mut(), &buf.rollout(false), out.as_mut_ptr(), 2) },
        AirsStatus::NullPointer
    );
    assert_eq!(unsafe { airs_reward_reset(ptr::null_mut()) }, AirsStatus::NullPointer);
    unsafe { airs_reward_free(ptr::null_mut()) };
}

#[test]
fn reset_restarts_episodic_state() {
    let buf = buffers(6, 2, 3);
    let mut m = Reward::new("pseudo_counts", 3, 3, None, 1).unwrap();
    let first = m.compute(&buf.rollout(false)).unwrap();
    assert_ne!(m.compute(&buf.rollout(false)).unwrap(), first);
    assert_eq!(unsafe { airs_reward_reset(m.0) }, AirsStatus::Ok);
    assert_eq!(m.compute(&buf.rollout(false)).unwrap(), first);
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(airs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
