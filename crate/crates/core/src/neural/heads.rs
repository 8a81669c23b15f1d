//! Composite models built from [`Network`]s: the categorical policy (with an
//! optional advantage head) and the two-branch value network.

use super::{Activation, Matrix, Network, Optimizer, Tape};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A model made of several networks, updated block-wise.
pub trait Model {
    fn networks(&self) -> Vec<&Network>;
    fn networks_mut(&mut self) -> Vec<&mut Network>;

    /// Named networks for checkpointing.
    fn named_networks(&self) -> Vec<(String, &Network)>;

    fn all_finite(&self) -> bool {
        self.networks().iter().all(|n| n.all_finite())
    }

    /// One optimizer step; `grads[i]` belongs to `networks_mut()[i]`.
    fn apply_gradients(&mut self, opt: &mut Optimizer, grads: &[Vec<f64>]) {
        for (slot, (net, g)) in self.networks_mut().into_iter().zip(grads).enumerate() {
            opt.step(slot, net.params_mut(), g);
        }
    }
}

fn trunk(obs_dim: usize, hidden: &[usize], act: Activation, rng: &mut Rng) -> Result<Network> {
    if hidden.is_empty() {
        return Err(Error::config("hidden", "at least one hidden layer is required"));
    }
    let mut sizes = vec![obs_dim];
    sizes.extend_from_slice(hidden);
    Network::mlp(&sizes, act, act, None, rng)
}

fn linear_head(inputs: usize, outputs: usize, gain: f64, rng: &mut Rng) -> Result<Network> {
    Network::mlp(
        &[inputs, outputs],
        Activation::Identity,
        Activation::Identity,
        Some(gain),
        rng,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    trunk: Network,
    logits: Network,
    advantage: Option<Network>,
}

#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub logits: Matrix,
    /// Per-action advantage predictions, present when the net has an advantage head.
    pub advantages: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct PolicyTape {
    trunk: Tape,
    logits: Tape,
    advantage: Option<Tape>,
}

impl PolicyNet {
    pub fn new(
        obs_dim: usize,
        hidden: &[usize],
        n_actions: usize,
        with_advantage: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let trunk = trunk(obs_dim, hidden, Activation::Tanh, rng)?;
        let width = *hidden.last().unwrap();
        let logits = linear_head(width, n_actions, 0.01, rng)?;
        let advantage = if with_advantage {
            Some(linear_head(width, n_actions, 1.0, rng)?)
        } else {
            None
        };
        Ok(Self {
            trunk,
            logits,
            advantage,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.logits.output_width()
    }

    pub fn has_advantage_head(&self) -> bool {
        self.advantage.is_some()
    }

    pub fn forward(&self, x: &Matrix) -> Result<PolicyOutput> {
        let h = self.trunk.forward(x)?;
        Ok(PolicyOutput {
            logits: self.logits.forward(&h)?,
            advantages: self.advantage.as_ref().map(|a| a.forward(&h)).transpose()?,
        })
    }

    pub fn forward_tape(&self, x: &Matrix) -> Result<(PolicyOutput, PolicyTape)> {
        let trunk = self.trunk.forward_tape(x)?;
        let h = trunk.output().unwrap();
        let logits = self.logits.forward_tape(h)?;
        let advantage = self
            .advantage
            .as_ref()
            .map(|a| a.forward_tape(h))
            .transpose()?;
        let out = PolicyOutput {
            logits: logits.output().unwrap().clone(),
            advantages: advantage.as_ref().map(|t| t.output().unwrap().clone()),
        };
        Ok((
            out,
            PolicyTape {
                trunk,
                logits,
                advantage,
            },
        ))
    }

    /// Gradients in `networks_mut()` order.
    pub fn backward(
        &self,
        tape: &PolicyTape,
        d_logits: &Matrix,
        d_advantages: Option<&Matrix>,
    ) -> Result<Vec<Vec<f64>>> {
        let (g_logits, mut d_h) = self.logits.backward(&tape.logits, d_logits)?;
        let mut grads = Vec::with_capacity(3);
        let g_adv = match (&self.advantage, &tape.advantage, d_advantages) {
            (Some(net), Some(t), Some(d)) => {
                let (g, dh) = net.backward(t, d)?;
                d_h.add_assign(&dh);
                Some(g)
            }
            (Some(net), _, None) => Some(vec![0.0; net.param_count()]),
            (None, _, Some(_)) => {
                return Err(Error::State("policy has no advantage head".into()));
            }
            _ => None,
        };
        let (g_trunk, _) = self.trunk.backward(&tape.trunk, &d_h)?;
        grads.push(g_trunk);
        grads.push(g_logits);
        if let Some(g) = g_adv {
            grads.push(g);
        }
        Ok(grads)
    }
}

impl Model for PolicyNet {
    fn networks(&self) -> Vec<&Network> {
        let mut v = vec![&self.trunk, &self.logits];
        v.extend(self.advantage.as_ref());
        v
    }

    fn networks_mut(&mut self) -> Vec<&mut Network> {
        let mut v = vec![&mut self.trunk, &mut self.logits];
        v.extend(self.advantage.as_mut());
        v
    }

    fn named_networks(&self) -> Vec<(String, &Network)> {
        let mut v = vec![
            ("policy.trunk".to_string(), &self.trunk),
            ("policy.logits".to_string(), &self.logits),
        ];
        if let Some(a) = &self.advantage {
            v.push(("policy.advantage".to_string(), a));
        }
        v
    }
}

/// Value network with an extrinsic-return head `V^E` and a total-return head
/// `V^{E+I}`.
///
/// Both heads start from identical parameters, so they stay identical for as
/// long as they are trained on identical targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoHeadValueNet {
    trunk_e: Network,
    /// Present when the heads do not share a trunk.
    trunk_ei: Option<Network>,
    head_e: Network,
    head_ei: Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueOutput {
    pub extrinsic: Vec<f64>,
    pub total: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueTape {
    trunk_e: Tape,
    trunk_ei: Option<Tape>,
    head_e: Tape,
    head_ei: Tape,
}

impl TwoHeadValueNet {
    pub fn new(obs_dim: usize, hidden: &[usize], shared_trunk: bool, rng: &mut Rng) -> Result<Self> {
        let trunk_e = trunk(obs_dim, hidden, Activation::Tanh, rng)?;
        let head_e = linear_head(*hidden.last().unwrap(), 1, 1.0, rng)?;
        Ok(Self {
            trunk_ei: (!shared_trunk).then(|| trunk_e.clone()),
            trunk_e,
            head_ei: head_e.clone(),
            head_e,
        })
    }

    pub fn shared_trunk(&self) -> bool {
        self.trunk_ei.is_none()
    }

    pub fn forward(&self, x: &Matrix) -> Result<ValueOutput> {
        let h_e = self.trunk_e.forward(x)?;
        let extrinsic = self.head_e.forward(&h_e)?.into_vec();
        let total = match &self.trunk_ei {
            Some(t) => self.head_ei.forward(&t.forward(x)?)?,
            None => self.head_ei.forward(&h_e)?,
        }
        .into_vec();
        Ok(ValueOutput { extrinsic, total })
    }

    pub fn forward_tape(&self, x: &Matrix) -> Result<(ValueOutput, ValueTape)> {
        let trunk_e = self.trunk_e.forward_tape(x)?;
        let trunk_ei = self
            .trunk_ei
            .as_ref()
            .map(|t| t.forward_tape(x))
            .transpose()?;
        let h_ei = trunk_ei.as_ref().unwrap_or(&trunk_e).output().unwrap();
        let head_ei = self.head_ei.forward_tape(h_ei)?;
        let head_e = self.head_e.forward_tape(trunk_e.output().unwrap())?;
        let out = ValueOutput {
            extrinsic: head_e.output().unwrap().as_slice().to_vec(),
            total: head_ei.output().unwrap().as_slice().to_vec(),
        };
        Ok((
            out,
            ValueTape {
                trunk_e,
                trunk_ei,
                head_e,
                head_ei,
            },
        ))
    }

    /// Gradients in `networks_mut()` order given dL/dV^E and dL/dV^{E+I}.
    pub fn backward(&self, tape: &ValueTape, d_e: &[f64], d_ei: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = d_e.len();
        let (g_head_e, dh_e) = self
            .head_e
            .backward(&tape.head_e, &Matrix::from_vec(n, 1, d_e.to_vec())?)?;
        let (g_head_ei, dh_ei) = self
            .head_ei
            .backward(&tape.head_ei, &Matrix::from_vec(n, 1, d_ei.to_vec())?)?;
        let mut grads = Vec::with_capacity(4);
        match (&self.trunk_ei, &tape.trunk_ei) {
            (Some(t_ei), Some(tape_ei)) => {
                grads.push(self.trunk_e.backward(&tape.trunk_e, &dh_e)?.0);
                grads.push(t_ei.backward(tape_ei, &dh_ei)?.0);
            }
            (None, None) => {
                let mut dh = dh_e;
                dh.add_assign(&dh_ei);
                grads.push(self.trunk_e.backward(&tape.trunk_e, &dh)?.0);
            }
            _ => return Err(Error::State("value tape does not match network layout".into())),
        }
        grads.push(g_head_e);
        grads.push(g_head_ei);
        Ok(grads)
    }
}

impl Model for TwoHeadValueNet {
    fn networks(&self) -> Vec<&Network> {
        let mut v = vec![&self.trunk_e];
        v.extend(self.trunk_ei.as_ref());
        v.push(&self.head_e);
        v.push(&self.head_ei);
        v
    }

    fn networks_mut(&mut self) -> Vec<&mut Network> {
        let mut v = vec![&mut self.trunk_e];
        v.extend(self.trunk_ei.as_mut());
        v.push(&mut self.head_e);
        v.push(&mut self.head_ei);
        v
    }

    fn named_networks(&self) -> Vec<(String, &Network)> {
        let mut v = vec![("value.trunk_e".to_string(), &self.trunk_e)];
        if let Some(t) = &self.trunk_ei {
            v.push(("value.trunk_ei".to_string(), t));
        }
        v.push(("value.head_e".to_string(), &self.head_e));
        v.push(("value.head_ei".to_string(), &self.head_ei));
        v
    }
}
