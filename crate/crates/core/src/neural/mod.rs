//! Small feed-forward approximators with hand-written reverse-mode gradients.

mod checkpoint;
mod dist;
mod heads;
mod matrix;
mod network;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dist::{log_softmax, Categorical};
pub use heads::{Model, PolicyNet, PolicyOutput, PolicyTape, TwoHeadValueNet, ValueOutput, ValueTape};
pub use matrix::Matrix;
pub use network::{Activation, LayerSpec, Network, Tape};
pub use optim::{clip_global_norm, global_norm, Optimizer, OptimizerConfig, OptimizerKind};
