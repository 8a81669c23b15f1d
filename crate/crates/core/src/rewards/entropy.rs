use super::knn::KnnIndex;
use super::{check_batch, IntrinsicReward, RewardKind};
use crate::batch::RolloutBatch;
use crate::encoder::FixedRandomEncoder;
use crate::error::{Error, Result};
use crate::neural::Network;

/// Distances floored before fractional powers.
pub const MIN_DISTANCE: f64 = 1e-6;

/// k-NN distances of every batch embedding against the rest of the batch.
fn pooled_knn(encoder: &FixedRandomEncoder, batch: &RolloutBatch, k: usize) -> Result<Vec<Vec<f64>>> {
    let emb = encoder.encode_flat(&batch.observations)?;
    let idx = KnnIndex::from_flat(emb.cols(), emb.into_vec())?;
    if idx.len() < 2 {
        return Err(Error::State(format!(
            "k-NN population has {} sample(s); at least 2 required",
            idx.len()
        )));
    }
    (0..idx.len())
        .map(|i| idx.knn_distances(idx.point(i), k, Some(i)))
        .collect()
}

/// Shannon-entropy bonus: mean of `log(d + 1)` over the k nearest
/// neighbours within the batch.
#[derive(Debug, Clone)]
pub struct Re3 {
    encoder: FixedRandomEncoder,
    k: usize,
}

impl Re3 {
    pub fn new(encoder: FixedRandomEncoder, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.re3.k", "must be at least 1"));
        }
        Ok(Self { encoder, k })
    }

    pub fn encoder(&self) -> &FixedRandomEncoder {
        &self.encoder
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl IntrinsicReward for Re3 {
    fn networks(&self) -> Vec<(String, &Network)> {
        vec![("encoder".into(), self.encoder.network())]
    }

    fn kind(&self) -> RewardKind {
        RewardKind::Re3
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.encoder.obs_dim())?;
        Ok(pooled_knn(&self.encoder, batch, self.k)?
            .into_iter()
            .map(|d| d.iter().map(|x| (x + 1.0).ln()).sum::<f64>() / d.len() as f64)
            .collect())
    }
}

/// Rényi-entropy bonus: mean of `d^(1 - alpha)` over the k nearest
/// neighbours within the batch.
#[derive(Debug, Clone)]
pub struct Rise {
    encoder: FixedRandomEncoder,
    k: usize,
    alpha: f64,
}

impl Rise {
    pub fn new(encoder: FixedRandomEncoder, k: usize, alpha: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.rise.k", "must be at least 1"));
        }
        if alpha == 1.0 || !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::config("rewards.rise.alpha", "must be finite, >= 0 and != 1"));
        }
        Ok(Self { encoder, k, alpha })
    }

    pub fn encoder(&self) -> &FixedRandomEncoder {
        &self.encoder
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl IntrinsicReward for Rise {
    fn networks(&self) -> Vec<(String, &Network)> {
        vec![("encoder".into(), self.encoder.network())]
    }

    fn kind(&self) -> RewardKind {
        RewardKind::Rise
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.encoder.obs_dim())?;
        let p = 1.0 - self.alpha;
        Ok(pooled_knn(&self.encoder, batch, self.k)?
            .into_iter()
            .map(|d| d.iter().map(|x| x.max(MIN_DISTANCE).powf(p)).sum::<f64>() / d.len() as f64)
            .collect())
    }
}
