use super::knn::KnnIndex;
use crate::error::Result;

pub const DEFAULT_KERNEL_EPS: f64 = 1e-3;

/// Inverse-kernel kernel `eps / (d^2 / d_m^2 + eps)`.
pub fn kernel(d: f64, dist_mean: f64, eps: f64) -> f64 {
    let ratio = if d == 0.0 {
        0.0
    } else if dist_mean > 0.0 {
        d * d / (dist_mean * dist_mean)
    } else {
        f64::INFINITY
    };
    eps / (ratio + eps)
}

#[derive(Debug, Clone)]
struct EnvMemory {
    episode: Option<u64>,
    index: KnnIndex,
}

/// Per-environment episodic memories yielding soft visit counts
/// `N = 1 + sum_k K(d_k)` over the k nearest stored embeddings.
///
/// Memories are keyed by episode id: a query tagged with a different id than
/// the stored one clears that environment's memory first. The running mean of
/// neighbour distances is shared across environments and is updated with each
/// query's distances before the kernel is evaluated.
#[derive(Debug, Clone)]
pub struct EpisodicCounter {
    k: usize,
    eps: f64,
    dim: usize,
    memories: Vec<EnvMemory>,
    dist_sum: f64,
    dist_count: u64,
}

impl EpisodicCounter {
    pub fn new(k: usize, eps: f64, dim: usize) -> Self {
        Self {
            k,
            eps,
            dim,
            memories: Vec::new(),
            dist_sum: 0.0,
            dist_count: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dist_mean(&self) -> f64 {
        if self.dist_count == 0 {
            0.0
        } else {
            self.dist_sum / self.dist_count as f64
        }
    }

    pub fn memory_len(&self, env: usize) -> usize {
        self.memories.get(env).map_or(0, |m| m.index.len())
    }

    pub fn reset(&mut self) {
        self.memories.clear();
        self.dist_sum = 0.0;
        self.dist_count = 0;
    }

    /// Soft count of `embedding` in `env`'s current episode, then stores it.
    pub fn observe(&mut self, env: usize, episode: u64, embedding: &[f64]) -> Result<f64> {
        while self.memories.len() <= env {
            self.memories.push(EnvMemory {
                episode: None,
                index: KnnIndex::new(self.dim),
            });
        }
        let mem = &mut self.memories[env];
        if mem.episode != Some(episode) {
            mem.index.clear();
            mem.episode = Some(episode);
        }
        let mut count = 1.0;
        if !mem.index.is_empty() {
            let d = mem.index.knn_distances(embedding, self.k, None)?;
            self.dist_sum += d.iter().sum::<f64>();
            self.dist_count += d.len() as u64;
            let dm = self.dist_sum / self.dist_count as f64;
            count += d.iter().map(|&x| kernel(x, dm, self.eps)).sum::<f64>();
        }
        mem.index.push(embedding);
        Ok(count)
    }
}
