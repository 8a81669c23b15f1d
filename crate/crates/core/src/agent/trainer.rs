use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    collect_rollout, gae, policy_gradient_loss, ppo_loss, standardize, value_loss, AgentConfig, PolicyLoss,
    ShapingConfig, TrainerMode, ValueEstimate, ValueLoss,
};
use crate::bandit::Bandit;
use crate::envs::{Environment, VecEnv, Variant};
use crate::error::{Error, Result};
use crate::neural::{clip_global_norm, Matrix, Model, Network, Optimizer, PolicyNet, TwoHeadValueNet};
use crate::rewards::{self, IntrinsicReward, RewardKind, RewardMixer, RewardParams, RunningNormalizer};
use crate::rng::{streams, Rng};

/// Episodes averaged into `mean_ep_return`.
const RETURN_WINDOW: usize = 100;

/// Advantages and value targets of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub advantages: Vec<f64>,
    pub returns_e: Vec<f64>,
    /// Total-return targets; absent in advantage-injection mode.
    pub returns_ei: Option<Vec<f64>>,
}

/// One line of the per-update CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub update: u64,
    pub env_steps: u64,
    /// Selected module, or `none` when no reward pool is configured.
    pub arm: String,
    pub beta: f64,
    /// Mean return of the most recent finished episodes; NaN before the first.
    pub mean_ep_return: f64,
    /// The estimate recorded to the bandit.
    pub mean_value_e: f64,
    pub policy_loss: f64,
    pub value_loss_e: f64,
    pub value_loss_ei: f64,
    pub entropy: f64,
    /// Pre-clip policy gradient norm of the last optimizer step.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub record: RunRecord,
    pub targets: Targets,
    pub arm: Option<usize>,
    /// Normalised intrinsic rewards fed to the mixer.
    pub intrinsic: Option<Vec<f64>>,
}

pub struct RunRecordWriter<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> RunRecordWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(inner),
        }
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.writer.serialize(record)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

struct Arm {
    module: Box<dyn IntrinsicReward>,
    normalizer: RunningNormalizer,
}

/// Actor-critic learner with an optional bandit over intrinsic reward modules.
pub struct Trainer {
    agent: AgentConfig,
    shaping: ShapingConfig,
    env: Box<dyn Environment>,
    policy: PolicyNet,
    value: TwoHeadValueNet,
    policy_opt: Optimizer,
    value_opt: Optimizer,
    arms: Vec<Arm>,
    bandit: Option<Bandit>,
    forced_arm: Option<usize>,
    mixer: RewardMixer,
    policy_rng: Rng,
    minibatch_rng: Rng,
    bandit_rng: Rng,
    recent: VecDeque<f64>,
    episodes: u64,
    update: u64,
    env_steps: u64,
}

impl Trainer {
    pub fn new(
        agent: &AgentConfig,
        shaping: &ShapingConfig,
        rewards: &RewardParams,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        let env = VecEnv::new(variant, agent.n_envs, seed);
        Self::with_env(agent, shaping, rewards, Box::new(env), seed)
    }

    pub fn with_env(
        agent: &AgentConfig,
        shaping: &ShapingConfig,
        rewards: &RewardParams,
        env: Box<dyn Environment>,
        seed: u64,
    ) -> Result<Self> {
        agent.validate()?;
        shaping.validate()?;
        rewards.validate()?;
        let (obs_dim, n_actions) = (env.obs_dim(), env.n_actions());
        if env.n_envs() != agent.n_envs {
            return Err(Error::config(
                "agent.n_envs",
                format!("environment has {} columns, config says {}", env.n_envs(), agent.n_envs),
            ));
        }
        let policy = PolicyNet::new(
            obs_dim,
            &agent.hidden,
            n_actions,
            agent.mode == TrainerMode::Daac,
            &mut Rng::new(seed, streams::POLICY_INIT),
        )?;
        let value = TwoHeadValueNet::new(
            obs_dim,
            &agent.hidden,
            agent.shared_value_trunk,
            &mut Rng::new(seed, streams::VALUE_INIT),
        )?;
        let arms = shaping
            .reward_set
            .iter()
            .map(|&k| {
                Ok(Arm {
                    module: rewards::build(k, obs_dim, n_actions, rewards, seed)?,
                    normalizer: RunningNormalizer::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let bandit = if arms.is_empty() {
            None
        } else {
            Some(Bandit::from_config(
                shaping.reward_set.iter().map(|k| k.name()),
                &shaping.bandit,
            )?)
        };
        Ok(Self {
            agent: agent.clone(),
            shaping: shaping.clone(),
            env,
            policy,
            value,
            policy_opt: Optimizer::new(agent.optimizer_config()),
            value_opt: Optimizer::new(agent.optimizer_config()),
            arms,
            bandit,
            forced_arm: None,
            mixer: RewardMixer::new(shaping.beta0, shaping.kappa)?,
            policy_rng: Rng::new(seed, streams::POLICY),
            minibatch_rng: Rng::new(seed, streams::MINIBATCH),
            bandit_rng: Rng::new(seed, streams::BANDIT),
            recent: VecDeque::with_capacity(RETURN_WINDOW),
            episodes: 0,
            update: 0,
            env_steps: 0,
        })
    }

    pub fn agent_config(&self) -> &AgentConfig {
        &self.agent
    }

    pub fn shaping_config(&self) -> &ShapingConfig {
        &self.shaping
    }

    pub fn policy(&self) -> &PolicyNet {
        &self.policy
    }

    pub fn value(&self) -> &TwoHeadValueNet {
        &self.value
    }

    pub fn bandit(&self) -> Option<&Bandit> {
        self.bandit.as_ref()
    }

    pub fn reward_kinds(&self) -> Vec<RewardKind> {
        self.arms.iter().map(|a| a.module.kind()).collect()
    }

    pub fn updates(&self) -> u64 {
        self.update
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn episodes_finished(&self) -> u64 {
        self.episodes
    }

    pub fn mean_recent_return(&self) -> f64 {
        if self.recent.is_empty() {
            f64::NAN
        } else {
            self.recent.iter().sum::<f64>() / self.recent.len() as f64
        }
    }

    /// Bypass the bandit's choice and use `arm` every update (still recorded).
    pub fn force_arm(&mut self, arm: Option<usize>) -> Result<()> {
        if let Some(i) = arm {
            if i >= self.arms.len() {
                return Err(Error::NotFound(format!("no arm with index {i}")));
            }
        }
        self.forced_arm = arm;
        Ok(())
    }

    /// Every network of the learner and its reward modules, for checkpoints.
    pub fn named_networks(&self) -> Vec<(String, &Network)> {
        let mut nets = Vec::new();
        for (name, n) in self.policy.named_networks() {
            nets.push((format!("policy.{name}"), n));
        }
        for (name, n) in self.value.named_networks() {
            nets.push((format!("value.{name}"), n));
        }
        for arm in &self.arms {
            let kind = arm.module.kind();
            for (name, n) in arm.module.networks() {
                nets.push((format!("{kind}.{name}"), n));
            }
        }
        nets
    }

    /// One pass of select, collect, shape, update and record.
    pub fn update(&mut self) -> Result<UpdateOutcome> {
        let beta = self.mixer.beta();
        let arm = match &self.bandit {
            Some(b) => Some(
                self.forced_arm
                    .unwrap_or_else(|| b.select_with(self.shaping.bandit.strategy, &mut self.bandit_rng)),
            ),
            None => None,
        };

        let rollout = collect_rollout(
            &self.policy,
            &self.value,
            self.env.as_mut(),
            self.agent.n_steps,
            &mut self.policy_rng,
        )?;
        let batch = &rollout.batch;
        let rows = batch.rows();
        self.env_steps += rows as u64;
        for ep in &rollout.finished {
            if self.recent.len() == RETURN_WINDOW {
                self.recent.pop_front();
            }
            self.recent.push_back(ep.ret);
            self.episodes += 1;
        }

        let intrinsic = match arm {
            Some(i) => {
                let a = &mut self.arms[i];
                let raw = a
                    .module
                    .compute(batch)
                    .map_err(|e| e.context(format!("reward module {}", a.module.kind())))?;
                if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "reward module {} produced {bad}",
                        a.module.kind()
                    )));
                }
                Some(if self.shaping.normalize {
                    a.normalizer.update_and_normalize(&raw, self.shaping.normalize_mode)
                } else {
                    raw
                })
            }
            None => None,
        };

        let targets = self.targets(&rollout.batch.extrinsic_rewards, &rollout, intrinsic.as_deref(), beta)?;
        let obs = Matrix::from_vec(rows, batch.obs_dim, batch.observations.clone())?;

        let (ploss, grad_norm) = self.update_policy(&obs, &batch.actions, &rollout.log_probs, &targets.advantages)?;
        let vloss = self.update_value(&obs, &targets)?;

        if !self.policy.all_finite() || !self.value.all_finite() {
            return Err(Error::Numeric(format!(
                "non-finite parameters after update {}",
                self.update + 1
            )));
        }
        for (what, v) in [("policy loss", ploss.total), ("value loss", vloss.total)] {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("{what} is {v} at update {}", self.update + 1)));
            }
        }

        let mean_value_e = match self.agent.value_estimate {
            ValueEstimate::Predicted => mean(&self.value.forward(&obs)?.extrinsic),
            ValueEstimate::Returns => mean(&targets.returns_e),
        };
        if let (Some(b), Some(i)) = (self.bandit.as_mut(), arm) {
            b.record_index(i, mean_value_e)?;
        }
        self.mixer.advance(rows as u64);
        self.update += 1;

        let record = RunRecord {
            update: self.update,
            env_steps: self.env_steps,
            arm: match arm {
                Some(i) => self.arms[i].module.kind().to_string(),
                None => "none".into(),
            },
            beta,
            mean_ep_return: self.mean_recent_return(),
            mean_value_e,
            policy_loss: ploss.policy,
            value_loss_e: vloss.loss_e,
            value_loss_ei: vloss.loss_ei,
            entropy: ploss.entropy,
            grad_norm,
        };
        Ok(UpdateOutcome {
            record,
            targets,
            arm,
            intrinsic,
        })
    }

    /// Run `n` updates, handing each outcome to `on_update`.
    pub fn run<F>(&mut self, n: u64, mut on_update: F) -> Result<()>
    where
        F: FnMut(&Trainer, &UpdateOutcome) -> Result<()>,
    {
        for _ in 0..n {
            let out = self.update()?;
            on_update(self, &out)?;
        }
        Ok(())
    }

    fn targets(
        &self,
        extrinsic: &[f64],
        rollout: &super::Rollout,
        intrinsic: Option<&[f64]>,
        beta: f64,
    ) -> Result<Targets> {
        let cfg = &self.agent;
        let n_envs = rollout.batch.n_envs;
        let dones = &rollout.batch.dones;
        let (adv_e, returns_e) = gae(extrinsic, &rollout.values_e, dones, n_envs, cfg.gamma, cfg.gae_lambda)?;
        let (mut advantages, returns_ei) = match cfg.mode {
            TrainerMode::A2cAdvantageInjection => {
                let mut adv = adv_e;
                if cfg.standardize_advantages {
                    standardize(&mut adv);
                }
                if let Some(i) = intrinsic {
                    inject_advantages(&mut adv, i, beta)?;
                }
                (adv, None)
            }
            TrainerMode::TwoBranchValue | TrainerMode::Daac => {
                let mut mixed = extrinsic.to_vec();
                if let Some(i) = intrinsic {
                    inject_advantages(&mut mixed, i, beta)?;
                }
                let (adv, ret) = gae(&mixed, &rollout.values_ei, dones, n_envs, cfg.gamma, cfg.gae_lambda)?;
                (adv, Some(ret))
            }
        };
        if cfg.standardize_advantages && cfg.mode != TrainerMode::A2cAdvantageInjection {
            standardize(&mut advantages);
        }
        Ok(Targets {
            advantages,
            returns_e,
            returns_ei,
        })
    }

    fn update_policy(
        &mut self,
        obs: &Matrix,
        actions: &[i64],
        old_log_probs: &[f64],
        advantages: &[f64],
    ) -> Result<(PolicyLoss, f64)> {
        let cfg = self.agent.clone();
        if cfg.mode != TrainerMode::Daac {
            let (loss, mut grads) = policy_gradient_loss(&self.policy, obs, actions, advantages, cfg.entropy_coef)?;
            let norm = clip_global_norm(&mut grads, cfg.max_grad_norm);
            self.policy.apply_gradients(&mut self.policy_opt, &grads);
            return Ok((loss, norm));
        }
        let mut last = (PolicyLoss::default(), 0.0);
        for _ in 0..cfg.policy_epochs {
            for idx in minibatches(obs.rows(), cfg.minibatches, &mut self.minibatch_rng) {
                let (loss, mut grads) = ppo_loss(
                    &self.policy,
                    &obs.select_rows(&idx),
                    &pick(actions, &idx),
                    &pick(old_log_probs, &idx),
                    &pick(advantages, &idx),
                    cfg.clip_range,
                    cfg.entropy_coef,
                    cfg.adv_coef,
                )?;
                let norm = clip_global_norm(&mut grads, cfg.max_grad_norm);
                self.policy.apply_gradients(&mut self.policy_opt, &grads);
                last = (loss, norm);
            }
        }
        Ok(last)
    }

    fn update_value(&mut self, obs: &Matrix, targets: &Targets) -> Result<ValueLoss> {
        let cfg = self.agent.clone();
        let t_ei = match cfg.mode {
            TrainerMode::A2cAdvantageInjection => None,
            _ => targets.returns_ei.as_deref(),
        };
        if cfg.mode != TrainerMode::Daac {
            let (loss, mut grads) = value_loss(&self.value, obs, &targets.returns_e, t_ei, cfg.value_coef)?;
            clip_global_norm(&mut grads, cfg.max_grad_norm);
            self.value.apply_gradients(&mut self.value_opt, &grads);
            return Ok(loss);
        }
        let mut last = ValueLoss::default();
        for _ in 0..cfg.value_epochs {
            for idx in minibatches(obs.rows(), cfg.minibatches, &mut self.minibatch_rng) {
                let sub_ei = t_ei.map(|t| pick(t, &idx));
                let (loss, mut grads) = value_loss(
                    &self.value,
                    &obs.select_rows(&idx),
                    &pick(&targets.returns_e, &idx),
                    sub_ei.as_deref(),
                    cfg.value_coef,
                )?;
                clip_global_norm(&mut grads, cfg.max_grad_norm);
                self.value.apply_gradients(&mut self.value_opt, &grads);
                last = loss;
            }
        }
        Ok(last)
    }
}

/// `target += beta * intrinsic` element-wise. Zero bonuses leave entries
/// untouched, so an all-zero module reproduces the unshaped run bit for bit.
pub fn inject_advantages(target: &mut [f64], intrinsic: &[f64], beta: f64) -> Result<()> {
    if target.len() != intrinsic.len() {
        return Err(Error::shape(format!(
            "intrinsic: expected {} entries, got {}",
            target.len(),
            intrinsic.len()
        )));
    }
    for (t, &i) in target.iter_mut().zip(intrinsic) {
        let bonus = beta * i;
        if bonus != 0.0 {
            *t += bonus;
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pick<T: Copy>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i]).collect()
}

/// Shuffled row indices split into `k` near-equal chunks.
fn minibatches(rows: usize, k: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..rows).collect();
    rng.shuffle(&mut idx);
    (0..k)
        .map(|j| idx[j * rows / k..(j + 1) * rows / k].to_vec())
        .filter(|c| !c.is_empty())
        .collect()
}
