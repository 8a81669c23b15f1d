//! Time-major rollout storage shared by environments, the agent and every
//! intrinsic reward module.
//!
//! All per-transition arrays are laid out row-major over `(n_steps, n_envs)`;
//! observations carry a trailing flattened `obs_dim` axis. The raw
//! observation shape is kept as metadata in `obs_shape`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AIRSBAT\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch {
    pub n_steps: usize,
    pub n_envs: usize,
    pub obs_dim: usize,
    pub obs_shape: Vec<usize>,
    pub observations: Vec<f64>,
    pub actions: Vec<i64>,
    pub extrinsic_rewards: Vec<f64>,
    pub next_observations: Vec<f64>,
    pub dones: Vec<bool>,
    pub episode_ids: Vec<u64>,
}

/// One row of a batch, borrowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a> {
    pub step: usize,
    pub observation: &'a [f64],
    pub action: i64,
    pub extrinsic_reward: f64,
    pub next_observation: &'a [f64],
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ShapeMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    ObsShapeMismatch {
        obs_dim: usize,
        shape_product: usize,
    },
    EpisodeIdDecreasing {
        env: usize,
        step: usize,
    },
    EpisodeIdIncrement {
        env: usize,
        step: usize,
    },
    NonFinite {
        field: &'static str,
        index: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ShapeMismatch {
                field,
                expected,
                actual,
            } => write!(f, "{field}: expected {expected} elements, found {actual}"),
            Violation::ObsShapeMismatch {
                obs_dim,
                shape_product,
            } => write!(f, "obs_shape product {shape_product} != obs_dim {obs_dim}"),
            Violation::EpisodeIdDecreasing { env, step } => {
                write!(f, "episode_ids decrease in env {env} at step {step}")
            }
            Violation::EpisodeIdIncrement { env, step } => write!(
                f,
                "episode_ids in env {env} at step {step} do not follow the dones flags"
            ),
            Violation::NonFinite { field, index } => {
                write!(f, "{field}[{index}] is not finite")
            }
        }
    }
}

impl RolloutBatch {
    /// Build a batch and reject it if any invariant is violated.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_steps: usize,
        n_envs: usize,
        obs_shape: Vec<usize>,
        observations: Vec<f64>,
        actions: Vec<i64>,
        extrinsic_rewards: Vec<f64>,
        next_observations: Vec<f64>,
        dones: Vec<bool>,
        episode_ids: Vec<u64>,
    ) -> Result<Self> {
        let obs_dim = obs_shape.iter().product();
        let batch = Self {
            n_steps,
            n_envs,
            obs_dim,
            obs_shape,
            observations,
            actions,
            extrinsic_rewards,
            next_observations,
            dones,
            episode_ids,
        };
        batch.ensure_valid()?;
        Ok(batch)
    }

    /// Episode ids implied by `dones`, starting every column at `start[env]`.
    pub fn episode_ids_from_dones(
        n_steps: usize,
        n_envs: usize,
        dones: &[bool],
        start: &[u64],
    ) -> Vec<u64> {
        let mut ids = vec![0; n_steps * n_envs];
        for env in 0..n_envs {
            let mut id = start.get(env).copied().unwrap_or(0);
            for t in 0..n_steps {
                ids[t * n_envs + env] = id;
                if dones[t * n_envs + env] {
                    id += 1;
                }
            }
        }
        ids
    }

    pub fn rows(&self) -> usize {
        self.n_steps * self.n_envs
    }

    #[inline]
    pub fn index(&self, step: usize, env: usize) -> usize {
        step * self.n_envs + env
    }

    pub fn observation(&self, step: usize, env: usize) -> &[f64] {
        let i = self.index(step, env) * self.obs_dim;
        &self.observations[i..i + self.obs_dim]
    }

    pub fn next_observation(&self, step: usize, env: usize) -> &[f64] {
        let i = self.index(step, env) * self.obs_dim;
        &self.next_observations[i..i + self.obs_dim]
    }

    pub fn transition(&self, step: usize, env: usize) -> Transition<'_> {
        let i = self.index(step, env);
        Transition {
            step,
            observation: self.observation(step, env),
            action: self.actions[i],
            extrinsic_reward: self.extrinsic_rewards[i],
            next_observation: self.next_observation(step, env),
            done: self.dones[i],
        }
    }

    /// All invariant violations; an empty list means the batch is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let rows = self.rows();
        let mut check = |field, expected, actual| {
            if expected != actual {
                out.push(Violation::ShapeMismatch {
                    field,
                    expected,
                    actual,
                });
            }
        };
        check("observations", rows * self.obs_dim, self.observations.len());
        check(
            "next_observations",
            rows * self.obs_dim,
            self.next_observations.len(),
        );
        check("actions", rows, self.actions.len());
        check("extrinsic_rewards", rows, self.extrinsic_rewards.len());
        check("dones", rows, self.dones.len());
        check("episode_ids", rows, self.episode_ids.len());

        let shape_product: usize = self.obs_shape.iter().product();
        if shape_product != self.obs_dim {
            out.push(Violation::ObsShapeMismatch {
                obs_dim: self.obs_dim,
                shape_product,
            });
        }

        for (field, data) in [
            ("observations", &self.observations),
            ("next_observations", &self.next_observations),
            ("extrinsic_rewards", &self.extrinsic_rewards),
        ] {
            if let Some(index) = data.iter().position(|x| !x.is_finite()) {
                out.push(Violation::NonFinite { field, index });
            }
        }

        if self.episode_ids.len() == rows && self.dones.len() == rows {
            for env in 0..self.n_envs {
                for t in 1..self.n_steps {
                    let prev = self.episode_ids[self.index(t - 1, env)];
                    let cur = self.episode_ids[self.index(t, env)];
                    if cur < prev {
                        out.push(Violation::EpisodeIdDecreasing { env, step: t });
                    } else if cur - prev != u64::from(self.dones[self.index(t - 1, env)]) {
                        out.push(Violation::EpisodeIdIncrement { env, step: t });
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            return Ok(());
        }
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(Error::Shape(msg.join("; ")))
    }

    /// Transitions of `episode` in column `env`, in time order.
    pub fn slice_episode(&self, env: usize, episode: u64) -> Result<Vec<Transition<'_>>> {
        if env >= self.n_envs {
            return Err(Error::NotFound(format!(
                "env {env} (batch has {} envs)",
                self.n_envs
            )));
        }
        let rows: Vec<Transition<'_>> = (0..self.n_steps)
            .filter(|&t| self.episode_ids[self.index(t, env)] == episode)
            .map(|t| self.transition(t, env))
            .collect();
        if rows.is_empty() {
            return Err(Error::NotFound(format!("episode {episode} in env {env}")));
        }
        Ok(rows)
    }

    /// Distinct episode ids present in a column, ascending.
    pub fn episodes_in(&self, env: usize) -> Vec<u64> {
        let mut ids: Vec<u64> = (0..self.n_steps)
            .map(|t| self.episode_ids[self.index(t, env)])
            .collect();
        ids.dedup();
        ids
    }

    /// Binary container: magic, JSON header, then little-endian row-major arrays.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.ensure_valid()?;
        let header = serde_json::json!({
            "version": FORMAT_VERSION,
            "n_steps": self.n_steps,
            "n_envs": self.n_envs,
            "obs_dim": self.obs_dim,
            "obs_shape": self.obs_shape,
            "dtype": "f64le",
        });
        let header = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        write_f64s(&mut w, &self.observations)?;
        for a in &self.actions {
            w.write_all(&a.to_le_bytes())?;
        }
        write_f64s(&mut w, &self.extrinsic_rewards)?;
        write_f64s(&mut w, &self.next_observations)?;
        let dones: Vec<u8> = self.dones.iter().map(|&d| u8::from(d)).collect();
        w.write_all(&dones)?;
        for id in &self.episode_ids {
            w.write_all(&id.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a rollout batch container".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        if header.version != FORMAT_VERSION || header.dtype != "f64le" {
            return Err(Error::Format(format!(
                "unsupported container version {} / dtype {}",
                header.version, header.dtype
            )));
        }
        let rows = header.n_steps * header.n_envs;
        let obs_len = rows * header.obs_dim;
        let observations = read_f64s(&mut r, obs_len)?;
        let actions = read_u64s(&mut r, rows)?
            .into_iter()
            .map(|x| x as i64)
            .collect();
        let extrinsic_rewards = read_f64s(&mut r, rows)?;
        let next_observations = read_f64s(&mut r, obs_len)?;
        let mut dones = vec![0u8; rows];
        r.read_exact(&mut dones)?;
        let episode_ids = read_u64s(&mut r, rows)?;
        let batch = RolloutBatch {
            n_steps: header.n_steps,
            n_envs: header.n_envs,
            obs_dim: header.obs_dim,
            obs_shape: header.obs_shape,
            observations,
            actions,
            extrinsic_rewards,
            next_observations,
            dones: dones.into_iter().map(|d| d != 0).collect(),
            episode_ids,
        };
        batch.ensure_valid()?;
        Ok(batch)
    }
}

#[derive(Deserialize)]
struct Header {
    version: u32,
    n_steps: usize,
    n_envs: usize,
    obs_dim: usize,
    obs_shape: Vec<usize>,
    dtype: String,
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_u64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<u64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
