//! On-policy actor-critic trainers with adaptive intrinsic reward selection.

mod gae;
mod rollout;
mod trainer;
mod update;

use serde::{Deserialize, Serialize};

pub use gae::{gae, standardize};
pub use rollout::{collect_rollout, Rollout};
pub use trainer::{inject_advantages, RunRecord, RunRecordWriter, Targets, Trainer, UpdateOutcome};
pub use update::{
    policy_gradient_loss, ppo_loss, value_loss, PolicyLoss, ValueLoss,
};

use crate::error::{Error, Result};
use crate::neural::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainerMode {
    /// Advantages from extrinsic rewards, standardised, with the scaled
    /// intrinsic bonus added on top. Only the extrinsic value head is trained.
    #[default]
    A2cAdvantageInjection,
    /// Advantages from the mixed reward under the total-return head; both
    /// heads are regressed on their own targets.
    TwoBranchValue,
    /// Clipped-surrogate policy with an advantage head, decoupled from the
    /// two-branch value network.
    Daac,
}

impl TrainerMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainerMode::A2cAdvantageInjection => "a2c_advantage_injection",
            TrainerMode::TwoBranchValue => "two_branch_value",
            TrainerMode::Daac => "daac",
        }
    }
}

impl std::fmt::Display for TrainerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrainerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a2c_advantage_injection" | "a2c" => Ok(TrainerMode::A2cAdvantageInjection),
            "two_branch_value" | "two_branch" => Ok(TrainerMode::TwoBranchValue),
            "daac" => Ok(TrainerMode::Daac),
            _ => Err(Error::config(
                "agent.mode",
                format!("'{s}' is not a2c_advantage_injection, two_branch_value or daac"),
            )),
        }
    }
}

/// Which rollout statistic feeds the bandit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueEstimate {
    /// Mean extrinsic-head prediction over the rollout's states, taken after
    /// the value update.
    #[default]
    Predicted,
    /// Mean extrinsic lambda-return target of the rollout.
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    #[default]
    Rmsprop,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub mode: TrainerMode,
    pub n_envs: usize,
    pub n_steps: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub optimizer: OptimizerChoice,
    pub lr: f64,
    pub rmsprop_alpha: f64,
    pub optimizer_eps: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub shared_value_trunk: bool,
    pub standardize_advantages: bool,
    pub value_estimate: ValueEstimate,
    pub clip_range: f64,
    pub policy_epochs: usize,
    pub value_epochs: usize,
    pub minibatches: usize,
    pub adv_coef: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: TrainerMode::A2cAdvantageInjection,
            n_envs: 16,
            n_steps: 5,
            gamma: 0.99,
            gae_lambda: 0.95,
            optimizer: OptimizerChoice::Rmsprop,
            lr: 1e-3,
            rmsprop_alpha: 0.99,
            optimizer_eps: 0.01,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            shared_value_trunk: true,
            standardize_advantages: true,
            value_estimate: ValueEstimate::Predicted,
            clip_range: 0.2,
            policy_epochs: 1,
            value_epochs: 9,
            minibatches: 8,
            adv_coef: 0.25,
        }
    }
}

impl AgentConfig {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerChoice::Rmsprop => OptimizerConfig {
                kind: crate::neural::OptimizerKind::Rmsprop {
                    alpha: self.rmsprop_alpha,
                },
                lr: self.lr,
                eps: self.optimizer_eps,
            },
            OptimizerChoice::Adam => OptimizerConfig {
                eps: self.optimizer_eps,
                ..OptimizerConfig::adam(self.lr)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, "must be positive"))
            }
        };
        let unit = |v: f64, field: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, "must lie in [0, 1]"))
            }
        };
        let nonneg = |v: f64, field: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, "must be >= 0"))
            }
        };
        if self.n_envs == 0 {
            return Err(Error::config("agent.n_envs", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("agent.n_steps", "must be at least 1"));
        }
        unit(self.gamma, "agent.gamma")?;
        unit(self.gae_lambda, "agent.gae_lambda")?;
        positive(self.lr, "agent.lr")?;
        unit(self.rmsprop_alpha, "agent.rmsprop_alpha")?;
        positive(self.optimizer_eps, "agent.optimizer_eps")?;
        nonneg(self.entropy_coef, "agent.entropy_coef")?;
        positive(self.value_coef, "agent.value_coef")?;
        positive(self.max_grad_norm, "agent.max_grad_norm")?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("agent.hidden", "needs at least one non-empty layer"));
        }
        positive(self.clip_range, "agent.clip_range")?;
        if self.policy_epochs == 0 {
            return Err(Error::config("agent.policy_epochs", "must be at least 1"));
        }
        if self.value_epochs == 0 {
            return Err(Error::config("agent.value_epochs", "must be at least 1"));
        }
        if self.minibatches == 0 || self.minibatches > self.n_envs * self.n_steps {
            return Err(Error::config(
                "agent.minibatches",
                "must lie between 1 and n_envs * n_steps",
            ));
        }
        nonneg(self.adv_coef, "agent.adv_coef")?;
        Ok(())
    }
}

/// Intrinsic reward pool and how its output is mixed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    /// Arms offered to the bandit; empty trains on extrinsic reward alone.
    pub reward_set: Vec<crate::rewards::RewardKind>,
    pub beta0: f64,
    pub kappa: f64,
    pub normalize: bool,
    pub normalize_mode: crate::rewards::NormalizeMode,
    pub bandit: crate::bandit::BanditConfig,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        use crate::rewards::RewardKind;
        Self {
            reward_set: vec![RewardKind::Identity, RewardKind::Re3],
            beta0: 0.1,
            kappa: 0.0,
            normalize: true,
            normalize_mode: crate::rewards::NormalizeMode::Scale,
            bandit: crate::bandit::BanditConfig::default(),
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.reward_set.iter().enumerate() {
            if self.reward_set[..i].contains(k) {
                return Err(Error::config("shaping.reward_set", format!("'{k}' listed twice")));
            }
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(Error::config("shaping.beta0", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::config("shaping.kappa", "must lie in [0, 1)"));
        }
        if !(self.bandit.c >= 0.0 && self.bandit.c.is_finite()) {
            return Err(Error::config("shaping.bandit.c", "must be finite and >= 0"));
        }
        if self.bandit.window == 0 {
            return Err(Error::config("shaping.bandit.window", "must be at least 1"));
        }
        Ok(())
    }
}
