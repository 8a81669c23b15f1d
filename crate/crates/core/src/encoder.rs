//! Observation encoders used by the novelty modules.
//!
//! [`FixedRandomEncoder`] is a frozen random projection. [`LearnedDynamicsEncoder`]
//! is trained from transitions through an inverse-dynamics head, with a forward
//! model predicting the next embedding. Reward computation never backpropagates
//! into either encoder; only [`LearnedDynamicsEncoder::train_dynamics`] changes
//! learned parameters.

use crate::batch::RolloutBatch;
use crate::error::{Error, Result};
use crate::neural::{Activation, Categorical, Matrix, Model, Network, Optimizer};
use crate::rng::Rng;

/// 64-bit FNV-1a over the parameter bit patterns.
pub fn fingerprint(params: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in params {
        for b in p.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub(crate) fn rows_matrix(data: &[f64], width: usize) -> Result<Matrix> {
    if width == 0 || data.len() % width != 0 {
        return Err(Error::shape(format!(
            "{} values cannot be split into rows of width {width}",
            data.len()
        )));
    }
    Matrix::from_vec(data.len() / width, width, data.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedRandomEncoder {
    net: Network,
}

impl FixedRandomEncoder {
    /// Linear Gaussian projection `obs_dim -> embed_dim`, std `1/sqrt(obs_dim)`.
    pub fn new(obs_dim: usize, embed_dim: usize, rng: &mut Rng) -> Result<Self> {
        let net = Network::mlp(
            &[obs_dim, embed_dim],
            Activation::Identity,
            Activation::Identity,
            None,
            rng,
        )?;
        Ok(Self { net })
    }

    /// Wrap an explicit network; its parameters are frozen from here on.
    pub fn from_network(net: Network) -> Self {
        Self { net }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_width()
    }

    pub fn embed_dim(&self) -> usize {
        self.net.output_width()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint(self.net.params())
    }

    pub fn encode(&self, observations: &Matrix) -> Result<Matrix> {
        self.net.forward(observations)
    }

    /// Encode a flat `(rows * obs_dim)` slice.
    pub fn encode_flat(&self, observations: &[f64]) -> Result<Matrix> {
        self.encode(&rows_matrix(observations, self.obs_dim())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsLoss {
    pub forward_loss: f64,
    pub inverse_loss: f64,
}

/// Encoder trained by reconstructing transitions.
///
/// Joint loss is `0.5 * forward + 0.5 * inverse` (inverse term only when
/// enabled). The forward loss `0.5 * ||f(psi(s), a) - psi(s')||^2` trains the
/// forward model only; the encoder is shaped by the inverse-dynamics
/// cross-entropy. With the inverse term off the encoder stays at its random
/// initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedDynamicsEncoder {
    encoder: Network,
    forward_model: Network,
    inverse_model: Network,
    n_actions: usize,
    use_inverse: bool,
}

impl LearnedDynamicsEncoder {
    pub fn new(
        obs_dim: usize,
        embed_dim: usize,
        n_actions: usize,
        hidden: usize,
        use_inverse: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::config("n_actions", "must be at least 1"));
        }
        let encoder = Network::mlp(
            &[obs_dim, hidden, embed_dim],
            Activation::Relu,
            Activation::Identity,
            None,
            rng,
        )?;
        let forward_model = Network::mlp(
            &[embed_dim + n_actions, hidden, embed_dim],
            Activation::Relu,
            Activation::Identity,
            None,
            rng,
        )?;
        let inverse_model = Network::mlp(
            &[2 * embed_dim, hidden, n_actions],
            Activation::Relu,
            Activation::Identity,
            None,
            rng,
        )?;
        Ok(Self {
            encoder,
            forward_model,
            inverse_model,
            n_actions,
            use_inverse,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.input_width()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.output_width()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn uses_inverse_loss(&self) -> bool {
        self.use_inverse
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn forward_model(&self) -> &Network {
        &self.forward_model
    }

    pub fn inverse_model(&self) -> &Network {
        &self.inverse_model
    }

    pub fn encode(&self, observations: &Matrix) -> Result<Matrix> {
        self.encoder.forward(observations)
    }

    pub fn encode_flat(&self, observations: &[f64]) -> Result<Matrix> {
        self.encode(&rows_matrix(observations, self.obs_dim())?)
    }

    pub fn one_hot(&self, actions: &[i64]) -> Result<Matrix> {
        let mut m = Matrix::zeros(actions.len(), self.n_actions);
        for (i, &a) in actions.iter().enumerate() {
            if a < 0 || a as usize >= self.n_actions {
                return Err(Error::Argument(format!(
                    "action {a} outside 0..{}",
                    self.n_actions
                )));
            }
            m.set(i, a as usize, 1.0);
        }
        Ok(m)
    }

    /// Forward-model prediction of the next embedding.
    pub fn predict_next(&self, embeddings: &Matrix, actions: &[i64]) -> Result<Matrix> {
        self.forward_model.forward(&embeddings.hcat(&self.one_hot(actions)?)?)
    }

    /// Joint loss and gradients (in `networks_mut()` order) on the given
    /// transitions. Exposed for gradient checking.
    pub fn loss_and_grads(
        &self,
        obs: &Matrix,
        actions: &[i64],
        next_obs: &Matrix,
    ) -> Result<(DynamicsLoss, Vec<Vec<f64>>)> {
        let n = obs.rows();
        if n == 0 {
            return Ok((
                DynamicsLoss {
                    forward_loss: 0.0,
                    inverse_loss: 0.0,
                },
                self.networks().iter().map(|n| vec![0.0; n.param_count()]).collect(),
            ));
        }
        let inv_n = 1.0 / n as f64;
        let enc_s = self.encoder.forward_tape(obs)?;
        let enc_next = self.encoder.forward_tape(next_obs)?;
        let e = enc_s.output().unwrap();
        let e_next = enc_next.output().unwrap();

        // Forward model: encoder inputs and targets are treated as constants.
        let fwd_in = e.hcat(&self.one_hot(actions)?)?;
        let fwd_tape = self.forward_model.forward_tape(&fwd_in)?;
        let pred = fwd_tape.output().unwrap();
        let mut d_pred = Matrix::zeros(n, self.embed_dim());
        let mut forward_loss = 0.0;
        for i in 0..n {
            for j in 0..self.embed_dim() {
                let diff = pred.get(i, j) - e_next.get(i, j);
                forward_loss += 0.5 * diff * diff * inv_n;
                d_pred.set(i, j, 0.5 * diff * inv_n);
            }
        }
        let (g_fwd, _) = self.forward_model.backward(&fwd_tape, &d_pred)?;

        let mut g_enc = vec![0.0; self.encoder.param_count()];
        let mut g_inv = vec![0.0; self.inverse_model.param_count()];
        let mut inverse_loss = 0.0;
        if self.use_inverse {
            let inv_in = e.hcat(e_next)?;
            let inv_tape = self.inverse_model.forward_tape(&inv_in)?;
            let logits = inv_tape.output().unwrap();
            let mut d_logits = Matrix::zeros(n, self.n_actions);
            for i in 0..n {
                let d = Categorical::from_logits(logits.row(i));
                let a = actions[i] as usize;
                inverse_loss -= d.log_prob(a) * inv_n;
                for (j, g) in d.grad_log_prob(a).into_iter().enumerate() {
                    d_logits.set(i, j, -0.5 * g * inv_n);
                }
            }
            let (g, d_in) = self.inverse_model.backward(&inv_tape, &d_logits)?;
            g_inv = g;
            let (d_e, d_e_next) = d_in.split_cols(self.embed_dim());
            let (g1, _) = self.encoder.backward(&enc_s, &d_e)?;
            let (g2, _) = self.encoder.backward(&enc_next, &d_e_next)?;
            for ((g, a), b) in g_enc.iter_mut().zip(g1).zip(g2) {
                *g = a + b;
            }
        }
        Ok((
            DynamicsLoss {
                forward_loss,
                inverse_loss,
            },
            vec![g_enc, g_fwd, g_inv],
        ))
    }

    /// Objective the gradients of [`Self::loss_and_grads`] belong to.
    pub fn joint_objective(loss: &DynamicsLoss) -> f64 {
        0.5 * loss.forward_loss + 0.5 * loss.inverse_loss
    }

    /// One optimizer step on the batch's non-terminal transitions.
    pub fn train_dynamics(&mut self, batch: &RolloutBatch, opt: &mut Optimizer) -> Result<DynamicsLoss> {
        let keep: Vec<usize> = (0..batch.rows()).filter(|&i| !batch.dones[i]).collect();
        let d = batch.obs_dim;
        let mut obs = Vec::with_capacity(keep.len() * d);
        let mut next = Vec::with_capacity(keep.len() * d);
        let mut actions = Vec::with_capacity(keep.len());
        for &i in &keep {
            obs.extend_from_slice(&batch.observations[i * d..(i + 1) * d]);
            next.extend_from_slice(&batch.next_observations[i * d..(i + 1) * d]);
            actions.push(batch.actions[i]);
        }
        let obs = Matrix::from_vec(keep.len(), d, obs)?;
        let next = Matrix::from_vec(keep.len(), d, next)?;
        let (loss, grads) = self.loss_and_grads(&obs, &actions, &next)?;
        if !keep.is_empty() {
            self.apply_gradients(opt, &grads);
        }
        if !self.all_finite() {
            return Err(Error::Numeric("dynamics encoder parameters became non-finite".into()));
        }
        Ok(loss)
    }
}

impl Model for LearnedDynamicsEncoder {
    fn networks(&self) -> Vec<&Network> {
        vec![&self.encoder, &self.forward_model, &self.inverse_model]
    }

    fn networks_mut(&mut self) -> Vec<&mut Network> {
        vec![
            &mut self.encoder,
            &mut self.forward_model,
            &mut self.inverse_model,
        ]
    }

    fn named_networks(&self) -> Vec<(String, &Network)> {
        vec![
            ("dynamics.encoder".into(), &self.encoder),
            ("dynamics.forward".into(), &self.forward_model),
            ("dynamics.inverse".into(), &self.inverse_model),
        ]
    }
}
