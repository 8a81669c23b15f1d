use super::episodic::EpisodicCounter;
use super::{check_batch, IntrinsicReward, RewardKind};
use crate::batch::RolloutBatch;
use crate::encoder::LearnedDynamicsEncoder;
use crate::error::{Error, Result};
use crate::neural::{Model, Network, Optimizer, OptimizerConfig};

fn dynamics_networks(d: &LearnedDynamicsEncoder) -> Vec<(String, &Network)> {
    d.named_networks()
}

/// Impact-driven bonus `||psi(s') - psi(s)|| / sqrt(N_ep(s'))`, zero on
/// terminal transitions. Terminal rows are not entered into the episodic
/// memory.
#[derive(Debug, Clone)]
pub struct Ride {
    dynamics: LearnedDynamicsEncoder,
    counter: EpisodicCounter,
    opt: Optimizer,
    learn: bool,
}

impl Ride {
    pub fn new(dynamics: LearnedDynamicsEncoder, k: usize, kernel_eps: f64, opt: OptimizerConfig) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.ride.k", "must be at least 1"));
        }
        let dim = dynamics.embed_dim();
        Ok(Self {
            dynamics,
            counter: EpisodicCounter::new(k, kernel_eps, dim),
            opt: Optimizer::new(opt),
            learn: true,
        })
    }

    pub fn dynamics(&self) -> &LearnedDynamicsEncoder {
        &self.dynamics
    }

    pub fn set_learning(&mut self, learn: bool) {
        self.learn = learn;
    }
}

impl IntrinsicReward for Ride {
    fn kind(&self) -> RewardKind {
        RewardKind::Ride
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.dynamics.obs_dim())?;
        let e = self.dynamics.encode_flat(&batch.observations)?;
        let e_next = self.dynamics.encode_flat(&batch.next_observations)?;
        let mut out = Vec::with_capacity(batch.rows());
        for row in 0..batch.rows() {
            if batch.dones[row] {
                out.push(0.0);
                continue;
            }
            let n = self
                .counter
                .observe(row % batch.n_envs, batch.episode_ids[row], e_next.row(row))?;
            let change = e
                .row(row)
                .iter()
                .zip(e_next.row(row))
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt();
            out.push(change / n.sqrt());
        }
        if self.learn {
            self.dynamics.train_dynamics(batch, &mut self.opt)?;
        }
        Ok(out)
    }

    fn reset(&mut self) {
        self.counter.reset();
    }

    fn networks(&self) -> Vec<(String, &Network)> {
        dynamics_networks(&self.dynamics)
    }
}

/// Curiosity bonus `||f(psi(s), a) - psi(s')||^2`, zero on terminal
/// transitions.
#[derive(Debug, Clone)]
pub struct Icm {
    dynamics: LearnedDynamicsEncoder,
    opt: Optimizer,
    learn: bool,
}

impl Icm {
    pub fn new(dynamics: LearnedDynamicsEncoder, opt: OptimizerConfig) -> Self {
        Self {
            dynamics,
            opt: Optimizer::new(opt),
            learn: true,
        }
    }

    pub fn dynamics(&self) -> &LearnedDynamicsEncoder {
        &self.dynamics
    }

    pub fn set_learning(&mut self, learn: bool) {
        self.learn = learn;
    }
}

impl IntrinsicReward for Icm {
    fn kind(&self) -> RewardKind {
        RewardKind::Icm
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.dynamics.obs_dim())?;
        let e = self.dynamics.encode_flat(&batch.observations)?;
        let e_next = self.dynamics.encode_flat(&batch.next_observations)?;
        let pred = self.dynamics.predict_next(&e, &batch.actions)?;
        let out = (0..batch.rows())
            .map(|row| {
                if batch.dones[row] {
                    0.0
                } else {
                    pred.row(row)
                        .iter()
                        .zip(e_next.row(row))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                }
            })
            .collect();
        if self.learn {
            self.dynamics.train_dynamics(batch, &mut self.opt)?;
        }
        Ok(out)
    }

    fn networks(&self) -> Vec<(String, &Network)> {
        dynamics_networks(&self.dynamics)
    }
}
