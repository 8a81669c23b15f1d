use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `v <- alpha v + (1 - alpha) g^2; p <- p - lr g / (sqrt(v) + eps)`.
    Rmsprop { alpha: f64 },
    /// Bias-corrected Adam.
    Adam { beta1: f64, beta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub kind: OptimizerKind,
    pub lr: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn rmsprop(lr: f64, eps: f64) -> Self {
        Self {
            kind: OptimizerKind::Rmsprop { alpha: 0.99 },
            lr,
            eps,
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
            },
            lr,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Slot {
    steps: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// First-order optimizer with one state slot per parameter block.
///
/// A model made of several networks uses one slot index per network.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    slots: Vec<Slot>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            slots: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        if self.slots.len() <= slot {
            self.slots.resize_with(slot + 1, Slot::default);
        }
        let s = &mut self.slots[slot];
        if s.second.len() != params.len() {
            s.first = vec![0.0; params.len()];
            s.second = vec![0.0; params.len()];
            s.steps = 0;
        }
        s.steps += 1;
        let OptimizerConfig { kind, lr, eps } = self.config;
        match kind {
            OptimizerKind::Rmsprop { alpha } => {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(s.second.iter_mut()) {
                    *v = alpha * *v + (1.0 - alpha) * g * g;
                    *p -= lr * g / (v.sqrt() + eps);
                }
            }
            OptimizerKind::Adam { beta1, beta2 } => {
                let bc1 = 1.0 - beta1.powi(s.steps as i32);
                let bc2 = 1.0 - beta2.powi(s.steps as i32);
                for (((p, &g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(s.first.iter_mut())
                    .zip(s.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Global L2 norm over several gradient blocks.
pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescale all blocks jointly so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    debug_assert!(max_norm > 0.0);
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut().flat_map(|g| g.iter_mut()) {
            *g *= scale;
        }
    }
    norm
}
