use crate::batch::RolloutBatch;
use crate::envs::{EpisodeEnd, Environment};
use crate::error::Result;
use crate::neural::{Categorical, Matrix, PolicyNet, TwoHeadValueNet};
use crate::rng::Rng;

/// One collected rollout plus the quantities the updates need.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub batch: RolloutBatch,
    /// `V^E` at every state including the bootstrap row `(n_steps + 1) * n_envs`.
    pub values_e: Vec<f64>,
    /// `V^{E+I}` in the same layout.
    pub values_ei: Vec<f64>,
    /// Behaviour log-probabilities of the taken actions.
    pub log_probs: Vec<f64>,
    pub finished: Vec<EpisodeEnd>,
}

/// Run `n_steps` of the stochastic policy in every env.
pub fn collect_rollout(
    policy: &PolicyNet,
    value: &TwoHeadValueNet,
    env: &mut dyn Environment,
    n_steps: usize,
    rng: &mut Rng,
) -> Result<Rollout> {
    let n_envs = env.n_envs();
    let dim = env.obs_dim();
    let rows = n_steps * n_envs;
    let mut observations = Vec::with_capacity(rows * dim);
    let mut next_observations = Vec::with_capacity(rows * dim);
    let mut actions = Vec::with_capacity(rows);
    let mut rewards = Vec::with_capacity(rows);
    let mut dones = Vec::with_capacity(rows);
    let mut episode_ids = Vec::with_capacity(rows);
    let mut log_probs = Vec::with_capacity(rows);
    let mut finished = Vec::new();

    for _ in 0..n_steps {
        let obs = env.observations().to_vec();
        episode_ids.extend_from_slice(env.episode_ids());
        let logits = policy.forward(&Matrix::from_vec(n_envs, dim, obs.clone())?)?.logits;
        let mut step_actions = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let d = Categorical::from_logits(logits.row(i));
            let a = rng.categorical(d.probs());
            log_probs.push(d.log_prob(a));
            step_actions.push(a as i64);
        }
        let s = env.step(&step_actions)?;
        observations.extend(obs);
        next_observations.extend(s.next_observations);
        actions.extend(step_actions);
        rewards.extend(s.rewards);
        dones.extend(s.dones);
        finished.extend(s.finished);
    }

    let mut all_states = observations.clone();
    all_states.extend_from_slice(env.observations());
    let v = value.forward(&Matrix::from_vec(rows + n_envs, dim, all_states)?)?;
    let batch = RolloutBatch::new(
        n_steps,
        n_envs,
        vec![dim],
        observations,
        actions,
        rewards,
        next_observations,
        dones,
        episode_ids,
    )?;
    Ok(Rollout {
        batch,
        values_e: v.extrinsic,
        values_ei: v.total,
        log_probs,
        finished,
    })
}
