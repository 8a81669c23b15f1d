use super::normalizer::{NormalizeMode, RunningNormalizer};
use crate::error::{Error, Result};

/// `beta_t = beta0 * (1 - kappa)^t` with `t` counted in environment steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMixer {
    beta0: f64,
    kappa: f64,
    t: u64,
}

impl RewardMixer {
    pub fn new(beta0: f64, kappa: f64) -> Result<Self> {
        if !(beta0 >= 0.0) {
            return Err(Error::config("beta0", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::config("kappa", "must lie in [0, 1)"));
        }
        Ok(Self { beta0, kappa, t: 0 })
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn beta_at(&self, t: u64) -> f64 {
        if self.kappa == 0.0 {
            return self.beta0;
        }
        self.beta0 * (t as f64 * (-self.kappa).ln_1p()).exp()
    }

    pub fn beta(&self) -> f64 {
        self.beta_at(self.t)
    }

    pub fn advance(&mut self, env_steps: u64) {
        self.t += env_steps;
    }

    /// `E + beta_t * normalize(I)` with `beta_t` taken at the current step
    /// count, then advances the count by one step per element.
    pub fn mix(
        &mut self,
        extrinsic: &[f64],
        intrinsic: &[f64],
        normalizer: Option<(&mut RunningNormalizer, NormalizeMode)>,
    ) -> Result<Vec<f64>> {
        if extrinsic.len() != intrinsic.len() {
            return Err(Error::shape(format!(
                "extrinsic has {} entries, intrinsic {}",
                extrinsic.len(),
                intrinsic.len()
            )));
        }
        let beta = self.beta();
        let intrinsic = match normalizer {
            Some((n, mode)) => n.update_and_normalize(intrinsic, mode),
            None => intrinsic.to_vec(),
        };
        self.advance(extrinsic.len() as u64);
        Ok(extrinsic
            .iter()
            .zip(&intrinsic)
            .map(|(e, i)| e + beta * i)
            .collect())
    }
}
