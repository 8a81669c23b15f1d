use super::entropy::MIN_DISTANCE;
use super::knn::KnnIndex;
use super::{check_batch, IntrinsicReward, RewardKind};
use crate::batch::RolloutBatch;
use crate::encoder::FixedRandomEncoder;
use crate::error::{Error, Result};
use crate::neural::Network;

#[derive(Debug, Clone)]
struct EnvEpisodes {
    episode: Option<u64>,
    current: KnnIndex,
    former: Option<KnnIndex>,
}

/// Rényi-divergence bonus between the current and the previous episode of
/// each environment.
///
/// For a state `e` the i-th nearest distances to the previous episode and to
/// the earlier states of the current episode form the ratio
/// `(d_former_i / d_current_i)^(1 - alpha)`, averaged over
/// `k' = min(k, |current|, |former|)` neighbours. The first episode of an
/// environment and the first state of an episode score 0.
#[derive(Debug, Clone)]
pub struct Revd {
    encoder: FixedRandomEncoder,
    k: usize,
    alpha: f64,
    envs: Vec<EnvEpisodes>,
}

impl Revd {
    pub fn new(encoder: FixedRandomEncoder, k: usize, alpha: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("rewards.revd.k", "must be at least 1"));
        }
        if alpha == 1.0 || !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::config("rewards.revd.alpha", "must be finite, >= 0 and != 1"));
        }
        Ok(Self {
            encoder,
            k,
            alpha,
            envs: Vec::new(),
        })
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

    /// Score pre-computed embeddings (`rows * dim`, step-major like a batch).
    pub fn score_embeddings(
        &mut self,
        embeddings: &[f64],
        dim: usize,
        n_envs: usize,
        episode_ids: &[u64],
    ) -> Result<Vec<f64>> {
        if embeddings.len() != episode_ids.len() * dim {
            return Err(Error::shape("embedding rows do not match episode ids"));
        }
        while self.envs.len() < n_envs {
            self.envs.push(EnvEpisodes {
                episode: None,
                current: KnnIndex::new(dim),
                former: None,
            });
        }
        let p = 1.0 - self.alpha;
        let mut out = Vec::with_capacity(episode_ids.len());
        for (row, &ep) in episode_ids.iter().enumerate() {
            let st = &mut self.envs[row % n_envs];
            if st.episode != Some(ep) {
                if st.episode.is_some() {
                    let done = std::mem::replace(&mut st.current, KnnIndex::new(dim));
                    st.former = Some(done);
                }
                st.episode = Some(ep);
            }
            let e = &embeddings[row * dim..(row + 1) * dim];
            let value = match &st.former {
                Some(former) if !former.is_empty() && !st.current.is_empty() => {
                    let k = self.k.min(former.len()).min(st.current.len());
                    let df = former.knn_distances(e, k, None)?;
                    let dc = st.current.knn_distances(e, k, None)?;
                    df.iter()
                        .zip(&dc)
                        .map(|(f, c)| (f.max(MIN_DISTANCE) / c.max(MIN_DISTANCE)).powf(p))
                        .sum::<f64>()
                        / k as f64
                }
                _ => 0.0,
            };
            out.push(value);
            st.current.push(e);
        }
        Ok(out)
    }
}

impl IntrinsicReward for Revd {
    fn networks(&self) -> Vec<(String, &Network)> {
        vec![("encoder".into(), self.encoder.network())]
    }

    fn kind(&self) -> RewardKind {
        RewardKind::Revd
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.encoder.obs_dim())?;
        let emb = self.encoder.encode_flat(&batch.observations)?;
        let dim = emb.cols();
        self.score_embeddings(emb.as_slice(), dim, batch.n_envs, &batch.episode_ids)
    }

    fn reset(&mut self) {
        self.envs.clear();
    }
}
