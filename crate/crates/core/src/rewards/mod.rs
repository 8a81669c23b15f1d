//! Intrinsic reward modules behind a single batch-in, rewards-out interface.
//!
//! Every module consumes a [`RolloutBatch`] and returns one reward per row in
//! the batch's step-major order. Stateful modules (episodic memories, trained
//! networks) update their state as part of [`IntrinsicReward::compute`].

mod counts;
mod dynamics;
mod entropy;
pub mod episodic;
pub mod knn;
mod mixer;
mod normalizer;
mod revd;
mod rnd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use counts::{lifelong_factor, Ngu, PseudoCounts};
pub use dynamics::{Icm, Ride};
pub use entropy::{Re3, Rise, MIN_DISTANCE};
pub use episodic::EpisodicCounter;
pub use knn::KnnIndex;
pub use mixer::RewardMixer;
pub use normalizer::{NormalizeMode, RunningNormalizer};
pub use revd::Revd;
pub use rnd::Rnd;

use crate::batch::RolloutBatch;
use crate::encoder::{FixedRandomEncoder, LearnedDynamicsEncoder};
use crate::error::{Error, Result};
use crate::neural::{Network, OptimizerConfig};
use crate::rng::{streams, Rng};

pub trait IntrinsicReward: Send + fmt::Debug {
    fn kind(&self) -> RewardKind;

    /// One reward per batch row (`step * n_envs + env`).
    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>>;

    /// Forget episodic state.
    fn reset(&mut self) {}

    /// Learned or random networks owned by the module, for checkpoints.
    fn networks(&self) -> Vec<(String, &Network)> {
        Vec::new()
    }
}

pub(crate) fn check_batch(batch: &RolloutBatch, obs_dim: usize) -> Result<()> {
    batch.ensure_valid()?;
    if batch.obs_dim != obs_dim {
        return Err(Error::shape(format!(
            "observations: batch has width {}, module expects {obs_dim}",
            batch.obs_dim
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[serde(rename = "id")]
    Identity,
    Re3,
    Rise,
    Revd,
    Ride,
    PseudoCounts,
    Icm,
    Rnd,
    Ngu,
}

impl RewardKind {
    pub const ALL: [RewardKind; 9] = [
        RewardKind::Identity,
        RewardKind::Re3,
        RewardKind::Rise,
        RewardKind::Revd,
        RewardKind::Ride,
        RewardKind::PseudoCounts,
        RewardKind::Icm,
        RewardKind::Rnd,
        RewardKind::Ngu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Identity => "id",
            RewardKind::Re3 => "re3",
            RewardKind::Rise => "rise",
            RewardKind::Revd => "revd",
            RewardKind::Ride => "ride",
            RewardKind::PseudoCounts => "pseudo_counts",
            RewardKind::Icm => "icm",
            RewardKind::Rnd => "rnd",
            RewardKind::Ngu => "ngu",
        }
    }

    fn stream(self) -> u64 {
        streams::REWARD_BASE + self as u64
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let key = match lower.as_str() {
            "identity" | "none" => "id",
            "pseudocounts" | "pseudo-counts" => "pseudo_counts",
            other => other,
        };
        RewardKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::NotFound(format!("unknown reward module '{s}'")))
    }
}

/// Module that never rewards.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl IntrinsicReward for Identity {
    fn kind(&self) -> RewardKind {
        RewardKind::Identity
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        batch.ensure_valid()?;
        Ok(vec![0.0; batch.rows()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenyiParams {
    pub k: usize,
    pub alpha: f64,
}

impl Default for RenyiParams {
    fn default() -> Self {
        Self { k: 5, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RideParams {
    pub k: usize,
    pub inverse_loss: bool,
}

impl Default for RideParams {
    fn default() -> Self {
        Self {
            k: 10,
            inverse_loss: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcmParams {
    pub inverse_loss: bool,
}

impl Default for IcmParams {
    fn default() -> Self {
        Self { inverse_loss: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RndParams {
    pub out_dim: usize,
}

impl Default for RndParams {
    fn default() -> Self {
        Self { out_dim: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NguParams {
    pub k: usize,
    pub clip: f64,
}

impl Default for NguParams {
    fn default() -> Self {
        Self { k: 10, clip: 5.0 }
    }
}

/// Hyperparameters for every module; only the chosen module's table is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub embed_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub kernel_eps: f64,
    pub re3: KnnParams,
    pub rise: RenyiParams,
    pub revd: RenyiParams,
    pub ride: RideParams,
    pub pseudo_counts: KnnParams,
    pub icm: IcmParams,
    pub rnd: RndParams,
    pub ngu: NguParams,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            hidden: 64,
            lr: 1e-3,
            kernel_eps: episodic::DEFAULT_KERNEL_EPS,
            re3: KnnParams { k: 3 },
            rise: RenyiParams::default(),
            revd: RenyiParams::default(),
            ride: RideParams::default(),
            pseudo_counts: KnnParams { k: 10 },
            icm: IcmParams::default(),
            rnd: RndParams::default(),
            ngu: NguParams::default(),
        }
    }
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 3 }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::config("rewards.embed_dim", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("rewards.hidden", "must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("rewards.lr", "must be positive"));
        }
        if !(self.kernel_eps > 0.0) {
            return Err(Error::config("rewards.kernel_eps", "must be positive"));
        }
        if self.rnd.out_dim == 0 {
            return Err(Error::config("rewards.rnd.out_dim", "must be at least 1"));
        }
        for (field, k) in [
            ("rewards.re3.k", self.re3.k),
            ("rewards.rise.k", self.rise.k),
            ("rewards.revd.k", self.revd.k),
            ("rewards.ride.k", self.ride.k),
            ("rewards.pseudo_counts.k", self.pseudo_counts.k),
            ("rewards.ngu.k", self.ngu.k),
        ] {
            if k == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        for (field, a) in [("rewards.rise.alpha", self.rise.alpha), ("rewards.revd.alpha", self.revd.alpha)] {
            if a == 1.0 || !a.is_finite() || a < 0.0 {
                return Err(Error::config(field, "must be finite, >= 0 and != 1"));
            }
        }
        if !(self.ngu.clip >= 1.0) {
            return Err(Error::config("rewards.ngu.clip", "must be >= 1"));
        }
        Ok(())
    }
}

/// Construct a module for observations of width `obs_dim`. Random parameters
/// come from a stream reserved for the module kind under `seed`.
pub fn build(
    kind: RewardKind,
    obs_dim: usize,
    n_actions: usize,
    params: &RewardParams,
    seed: u64,
) -> Result<Box<dyn IntrinsicReward>> {
    params.validate()?;
    let mut rng = Rng::new(seed, kind.stream());
    let p = params;
    let fixed = |rng: &mut Rng| FixedRandomEncoder::new(obs_dim, p.embed_dim, rng);
    let learned =
        |inverse, rng: &mut Rng| LearnedDynamicsEncoder::new(obs_dim, p.embed_dim, n_actions, p.hidden, inverse, rng);
    Ok(match kind {
        RewardKind::Identity => Box::new(Identity),
        RewardKind::Re3 => Box::new(Re3::new(fixed(&mut rng)?, p.re3.k)?),
        RewardKind::Rise => Box::new(Rise::new(fixed(&mut rng)?, p.rise.k, p.rise.alpha)?),
        RewardKind::Revd => Box::new(Revd::new(fixed(&mut rng)?, p.revd.k, p.revd.alpha)?),
        RewardKind::Ride => Box::new(Ride::new(
            learned(p.ride.inverse_loss, &mut rng)?,
            p.ride.k,
            p.kernel_eps,
            OptimizerConfig::adam(p.lr),
        )?),
        RewardKind::PseudoCounts => Box::new(PseudoCounts::new(fixed(&mut rng)?, p.pseudo_counts.k, p.kernel_eps)?),
        RewardKind::Icm => Box::new(Icm::new(learned(p.icm.inverse_loss, &mut rng)?, OptimizerConfig::adam(p.lr))),
        RewardKind::Rnd => Box::new(Rnd::new(obs_dim, p.hidden, p.rnd.out_dim, p.lr, &mut rng)?),
        RewardKind::Ngu => {
            let rnd = Rnd::new(obs_dim, p.hidden, p.rnd.out_dim, p.lr, &mut rng)?;
            let enc = fixed(&mut rng)?;
            Box::new(Ngu::new(rnd, enc, p.ngu.k, p.kernel_eps, p.ngu.clip)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::tests::line_batch;

    #[test]
    fn names_round_trip() {
        for k in RewardKind::ALL {
            assert_eq!(k.name().parse::<RewardKind>().unwrap(), k);
        }
        assert_eq!("ID".parse::<RewardKind>().unwrap(), RewardKind::Identity);
        assert!(matches!("girm".parse::<RewardKind>(), Err(Error::NotFound(_))));
    }

    #[test]
    fn identity_returns_zeros_of_batch_shape() {
        let b = line_batch(&[false, true, false]);
        assert_eq!(Identity.compute(&b).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn every_module_builds_and_scores_finite() {
        let b = line_batch(&[false, false, true, false, false]);
        for kind in RewardKind::ALL {
            let mut m = build(kind, 1, 3, &RewardParams::default(), 7).unwrap();
            assert_eq!(m.kind(), kind);
            let r = m.compute(&b).unwrap();
            assert_eq!(r.len(), b.rows());
            assert!(r.iter().all(|x| x.is_finite()), "{kind}");
        }
    }

    #[test]
    fn wrong_observation_width_is_shape_error() {
        let b = line_batch(&[false; 4]);
        let mut m = build(RewardKind::Re3, 2, 3, &RewardParams::default(), 0).unwrap();
        assert!(matches!(m.compute(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn rise_alpha_one_names_field() {
        let mut p = RewardParams::default();
        p.rise.alpha = 1.0;
        let err = build(RewardKind::Rise, 1, 3, &p, 0).unwrap_err();
        assert!(err.to_string().contains("rewards.rise.alpha"));
    }
}
