use super::{check_batch, IntrinsicReward, RewardKind};
use crate::batch::RolloutBatch;
use crate::encoder::rows_matrix;
use crate::error::{Error, Result};
use crate::neural::{Activation, Matrix, Network, Optimizer, OptimizerConfig};
use crate::rng::Rng;

/// Random network distillation: squared error between a trained predictor
/// and a frozen random target on next observations.
#[derive(Debug, Clone)]
pub struct Rnd {
    target: Network,
    predictor: Network,
    opt: Optimizer,
    learn: bool,
}

impl Rnd {
    pub fn new(obs_dim: usize, hidden: usize, out_dim: usize, lr: f64, rng: &mut Rng) -> Result<Self> {
        let sizes = [obs_dim, hidden, out_dim];
        let target = Network::mlp(&sizes, Activation::Relu, Activation::Identity, None, rng)?;
        let predictor = Network::mlp(&sizes, Activation::Relu, Activation::Identity, None, rng)?;
        Self::from_networks(target, predictor, OptimizerConfig::adam(lr))
    }

    pub fn from_networks(target: Network, predictor: Network, opt: OptimizerConfig) -> Result<Self> {
        if target.input_width() != predictor.input_width()
            || target.output_width() != predictor.output_width()
        {
            return Err(Error::shape("target and predictor widths differ"));
        }
        Ok(Self {
            target,
            predictor,
            opt: Optimizer::new(opt),
            learn: true,
        })
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn predictor(&self) -> &Network {
        &self.predictor
    }

    pub fn obs_dim(&self) -> usize {
        self.target.input_width()
    }

    /// Disable predictor training (rewards become a pure function).
    pub fn set_learning(&mut self, learn: bool) {
        self.learn = learn;
    }

    /// Per-row `||predictor(x) - target(x)||^2`.
    pub fn errors(&self, x: &Matrix) -> Result<Vec<f64>> {
        let t = self.target.forward(x)?;
        let p = self.predictor.forward(x)?;
        Ok((0..x.rows())
            .map(|i| {
                p.row(i)
                    .iter()
                    .zip(t.row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })
            .collect())
    }

    /// Mean over rows of the squared error and its gradient with respect to
    /// the predictor parameters.
    pub fn loss_and_grad(&self, x: &Matrix) -> Result<(f64, Vec<f64>)> {
        let t = self.target.forward(x)?;
        let tape = self.predictor.forward_tape(x)?;
        let p = tape.output().unwrap();
        let scale = 1.0 / x.rows() as f64;
        let mut grad = Matrix::zeros(p.rows(), p.cols());
        let mut loss = 0.0;
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                let d = p.get(i, j) - t.get(i, j);
                loss += d * d * scale;
                grad.set(i, j, 2.0 * d * scale);
            }
        }
        let (g, _) = self.predictor.backward(&tape, &grad)?;
        Ok((loss, g))
    }

    /// One optimizer step on the mean squared error over all rows.
    pub fn train(&mut self, x: &Matrix) -> Result<f64> {
        if x.rows() == 0 {
            return Ok(0.0);
        }
        let (loss, g) = self.loss_and_grad(x)?;
        self.opt.step(0, self.predictor.params_mut(), &g);
        if !self.predictor.all_finite() {
            return Err(Error::Numeric("RND predictor parameters became non-finite".into()));
        }
        Ok(loss)
    }

    /// Errors on `next_observations`, then a training step on the same rows.
    pub(crate) fn errors_then_train(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        let x = rows_matrix(&batch.next_observations, self.obs_dim())?;
        let err = self.errors(&x)?;
        if self.learn {
            self.train(&x)?;
        }
        Ok(err)
    }
}

impl IntrinsicReward for Rnd {
    fn kind(&self) -> RewardKind {
        RewardKind::Rnd
    }

    fn compute(&mut self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        check_batch(batch, self.obs_dim())?;
        self.errors_then_train(batch)
    }

    fn networks(&self) -> Vec<(String, &Network)> {
        vec![
            ("rnd.target".into(), &self.target),
            ("rnd.predictor".into(), &self.predictor),
        ]
    }
}
