use super::episodic::EpisodicCounter;
use super::normalizer::RunningNormalizer;
use super::rnd::Rnd;
use super::{check_batch, IntrinsicReward, RewardKind};
use crate::batch::RolloutBatch;
use crate::encoder::FixedRandomEncoder;
use crate::error::{Error, Result};
use crate::neural::Network;

/// Episodic count bonus `1 / sqrt(N_ep(s'))`.
#[derive(Debug, Clone)]
pub struct PseudoCounts {
    encoder: FixedRandomEncoder,
    counter: EpisodicCounter,
}

impl PseudoCounts {
    pub fn new(encoder: FixedRandomEncoder, k: usize, kernel_eps: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.pseudo_counts.k", "must be at least 1"));
        }
        let dim = encoder.embed_dim();
        Ok(Self {
            encoder,
            counter: EpisodicCounter::new(k, kernel_eps, dim),
        })
    }

    pub fn encoder(&self) -> &FixedRandomEncoder {
        &self.encoder
    }

    pub fn counter(&self) -> &EpisodicCounter {
        &self.counter
    }
}

/// Soft counts of each row's next-observation embedding, rows in batch order.
pub(crate) fn episodic_counts(
    counter: &mut EpisodicCounter,
    embeddings: &[f64],
    dim: usize,
    batch: &RolloutBatch,
) -> Result<Vec<f64>> {
    (0..batch.rows())
        .map(|row| {
            counter.observe(
                row % batch.n_envs,
                batch.episode_ids[row],
                &embeddings[row * dim..(row + 1) * dim],
            )
        })
        .collect()
}

impl IntrinsicReward for PseudoCounts {
    fn networks(&self) -> Vec<(String, &Network)> {
        vec![("encoder".into(), self.encoder.network())]
    }

    fn kind(&self) -> RewardKind {
        RewardKind::PseudoCounts
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.encoder.obs_dim())?;
        let emb = self.encoder.encode_flat(&batch.next_observations)?;
        let counts = episodic_counts(&mut self.counter, emb.as_slice(), emb.cols(), batch)?;
        Ok(counts.into_iter().map(|n| 1.0 / n.sqrt()).collect())
    }

    fn reset(&mut self) {
        self.counter.reset();
    }
}

/// Episodic novelty scaled by a life-long RND factor:
/// `min(max(alpha_t, 1), C) / sqrt(N_ep(s'))` with
/// `alpha_t = 1 + (err - mean) / std` over the running RND error statistics.
#[derive(Debug, Clone)]
pub struct Ngu {
    rnd: Rnd,
    stats: RunningNormalizer,
    encoder: FixedRandomEncoder,
    counter: EpisodicCounter,
    clip: f64,
}

/// Life-long modulator for one RND error under the given statistics.
pub fn lifelong_factor(err: f64, mean: f64, std: f64) -> f64 {
    if std > 1e-8 {
        1.0 + (err - mean) / std
    } else {
        1.0
    }
}

impl Ngu {
    pub fn new(rnd: Rnd, encoder: FixedRandomEncoder, k: usize, kernel_eps: f64, clip: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.ngu.k", "must be at least 1"));
        }
        if !(clip >= 1.0) {
            return Err(Error::config("rewards.ngu.clip", "must be >= 1"));
        }
        if rnd.obs_dim() != encoder.obs_dim() {
            return Err(Error::shape("RND and episodic encoder disagree on obs_dim"));
        }
        let dim = encoder.embed_dim();
        Ok(Self {
            rnd,
            stats: RunningNormalizer::new(),
            encoder,
            counter: EpisodicCounter::new(k, kernel_eps, dim),
            clip,
        })
    }

    pub fn rnd(&self) -> &Rnd {
        &self.rnd
    }

    pub fn rnd_mut(&mut self) -> &mut Rnd {
        &mut self.rnd
    }

    pub fn encoder(&self) -> &FixedRandomEncoder {
        &self.encoder
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn error_stats(&self) -> &RunningNormalizer {
        &self.stats
    }

    /// Combine pre-computed modulators and soft counts.
    pub fn combine(&self, alpha: f64, count: f64) -> f64 {
        alpha.max(1.0).min(self.clip) / count.sqrt()
    }
}

impl IntrinsicReward for Ngu {
    fn kind(&self) -> RewardKind {
        RewardKind::Ngu
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.encoder.obs_dim())?;
        let err = self.rnd.errors_then_train(batch)?;
        self.stats.update(&err);
        let (mean, std) = (self.stats.mean(), self.stats.std());
        let emb = self.encoder.encode_flat(&batch.next_observations)?;
        let counts = episodic_counts(&mut self.counter, emb.as_slice(), emb.cols(), batch)?;
        Ok(err
            .iter()
            .zip(counts)
            .map(|(&e, n)| self.combine(lifelong_factor(e, mean, std), n))
            .collect())
    }

    fn reset(&mut self) {
        self.counter.reset();
    }

    fn networks(&self) -> Vec<(String, &Network)> {
        let mut nets = self.rnd.networks();
        nets.push(("encoder".into(), self.encoder.network()));
        nets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::tests::line_batch;
    use crate::rng::Rng;

    fn pseudo() -> PseudoCounts {
        let enc = FixedRandomEncoder::new(1, 2, &mut Rng::new(0, 0)).unwrap();
        PseudoCounts::new(enc, 10, 1e-3).unwrap()
    }

    #[test]
    fn first_visit_scores_one() {
        let mut m = pseudo();
        let r = m.compute(&line_batch(&[false; 3])).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn repeated_state_decays_as_inverse_sqrt() {
        let mut m = pseudo();
        let n = 6;
        let batch = RolloutBatch::new(
            n,
            1,
            vec![1],
            vec![0.0; n],
            vec![0; n],
            vec![0.0; n],
            vec![2.0; n],
            vec![false; n],
            vec![0; n],
        )
        .unwrap();
        let r = m.compute(&batch).unwrap();
        for (i, x) in r.iter().enumerate() {
            assert!((x - 1.0 / ((i + 1) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn memory_resets_after_done() {
        let mut m = pseudo();
        let r = m.compute(&line_batch(&[false, true, false])).unwrap();
        assert_eq!(r[2], 1.0);
    }

    #[test]
    fn ngu_clip_rules() {
        let mut rng = Rng::new(1, 1);
        let rnd = Rnd::new(1, 4, 2, 1e-3, &mut rng).unwrap();
        let enc = FixedRandomEncoder::new(1, 2, &mut rng).unwrap();
        let m = Ngu::new(rnd, enc, 5, 1e-3, 5.0).unwrap();
        assert_eq!(m.combine(7.0, 1.0), 5.0);
        assert_eq!(m.combine(0.3, 1.0), 1.0);
        assert_eq!(m.combine(2.0, 4.0), 0.5 * m.combine(2.0, 1.0));
        assert_eq!(lifelong_factor(3.0, 1.0, 0.5), 5.0);
        assert_eq!(lifelong_factor(3.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn ngu_rewards_are_bounded() {
        let mut rng = Rng::new(2, 2);
        let rnd = Rnd::new(1, 4, 2, 1e-3, &mut rng).unwrap();
        let enc = FixedRandomEncoder::new(1, 2, &mut rng).unwrap();
        let mut m = Ngu::new(rnd, enc, 5, 1e-3, 5.0).unwrap();
        let r = m.compute(&line_batch(&[false, false, true, false, false])).unwrap();
        assert!(r.iter().all(|&x| x > 0.0 && x <= 5.0));
    }
}
