//! Sparse-reward gridworlds and a synchronous vectoriser.

mod gridworld;

pub use gridworld::{Action, Cell, GridWorld, Step, Variant, N_ACTIONS};

use crate::error::Result;
use crate::rng::{streams, Rng};

/// A finished episode reported by [`VecEnv::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeEnd {
    pub env: usize,
    pub episode: u64,
    pub ret: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecStep {
    /// Observation reached by each env's action (terminal state on done).
    pub next_observations: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub finished: Vec<EpisodeEnd>,
}

/// A batch of environments stepped in lockstep with automatic resets.
pub trait Environment: Send {
    fn n_envs(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Current observations, one row per env.
    fn observations(&self) -> &[f64];
    /// Episode id of each env's current episode.
    fn episode_ids(&self) -> &[u64];
    fn step(&mut self, actions: &[i64]) -> Result<VecStep>;
}

/// `n_envs` gridworlds stepped in lockstep; a finished env is reset at once
/// with a fresh level seed drawn from its own stream.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<GridWorld>,
    level_rngs: Vec<Rng>,
    episodes: Vec<u64>,
    returns: Vec<f64>,
    obs: Vec<f64>,
}

impl VecEnv {
    pub fn new(variant: Variant, n_envs: usize, seed: u64) -> Self {
        let mut level_rngs: Vec<Rng> = (0..n_envs)
            .map(|i| Rng::new(seed, streams::ENV_BASE + i as u64))
            .collect();
        let envs: Vec<GridWorld> = level_rngs
            .iter_mut()
            .map(|r| GridWorld::new(variant, r.next_seed()))
            .collect();
        let dim = variant.obs_dim();
        let mut obs = vec![0.0; n_envs * dim];
        for (i, e) in envs.iter().enumerate() {
            e.write_observation(&mut obs[i * dim..(i + 1) * dim]);
        }
        Self {
            envs,
            level_rngs,
            episodes: vec![0; n_envs],
            returns: vec![0.0; n_envs],
            obs,
        }
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].obs_dim()
    }

    pub fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    pub fn envs(&self) -> &[GridWorld] {
        &self.envs
    }

    /// Current observations, one row per env.
    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    /// Episode id of each env's current episode.
    pub fn episode_ids(&self) -> &[u64] {
        &self.episodes
    }

    pub fn step(&mut self, actions: &[i64]) -> Result<VecStep> {
        let n = self.n_envs();
        let dim = self.obs_dim();
        let mut next = vec![0.0; n * dim];
        let mut rewards = vec![0.0; n];
        let mut dones = vec![false; n];
        let mut finished = Vec::new();
        for i in 0..n {
            let a = Action::from_index(actions[i])?;
            let s = self.envs[i].step(a);
            rewards[i] = s.reward;
            dones[i] = s.done;
            self.returns[i] += s.reward;
            self.envs[i].write_observation(&mut next[i * dim..(i + 1) * dim]);
            if s.done {
                finished.push(EpisodeEnd {
                    env: i,
                    episode: self.episodes[i],
                    ret: self.returns[i],
                    length: self.envs[i].steps(),
                });
                self.returns[i] = 0.0;
                self.episodes[i] += 1;
                let seed = self.level_rngs[i].next_seed();
                self.envs[i].reset(seed);
            }
            self.envs[i].write_observation(&mut self.obs[i * dim..(i + 1) * dim]);
        }
        Ok(VecStep {
            next_observations: next,
            rewards,
            dones,
            finished,
        })
    }
}

impl Environment for VecEnv {
    fn n_envs(&self) -> usize {
        VecEnv::n_envs(self)
    }

    fn obs_dim(&self) -> usize {
        VecEnv::obs_dim(self)
    }

    fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    fn observations(&self) -> &[f64] {
        VecEnv::observations(self)
    }

    fn episode_ids(&self) -> &[u64] {
        VecEnv::episode_ids(self)
    }

    fn step(&mut self, actions: &[i64]) -> Result<VecStep> {
        VecEnv::step(self, actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_reset_after_done() {
        let mut v = VecEnv::new(Variant::Empty(4), 2, 0);
        let initial = v.observations()[..v.obs_dim()].to_vec();
        // Empty 4x4: forward, turn right, forward reaches the goal at (2, 2).
        v.step(&[2, 0]).unwrap();
        v.step(&[1, 0]).unwrap();
        let s = v.step(&[2, 0]).unwrap();
        assert!(s.dones[0] && !s.dones[1]);
        assert!(s.rewards[0] > 0.0);
        assert_eq!(s.finished.len(), 1);
        assert_eq!(v.episode_ids(), &[1, 0]);
        assert_eq!(&v.observations()[..v.obs_dim()], initial.as_slice());
        assert_ne!(&s.next_observations[..v.obs_dim()], initial.as_slice());
    }

    #[test]
    fn seeded_levels_are_reproducible() {
        let a = VecEnv::new(Variant::DoorKey(6), 3, 11);
        let b = VecEnv::new(Variant::DoorKey(6), 3, 11);
        assert_eq!(a.observations(), b.observations());
        let c = VecEnv::new(Variant::DoorKey(6), 3, 12);
        assert_ne!(a.observations(), c.observations());
    }
}
