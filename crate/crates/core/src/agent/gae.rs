use crate::error::{Error, Result};

/// Generalised advantage estimates and value targets for a step-major
/// `(n_steps, n_envs)` rollout.
///
/// `values` carries one extra bootstrap row: `values[t * n_envs + e]` is
/// `V(s_t)` for `t <= n_steps`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    n_envs: usize,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_envs == 0 || rewards.len() % n_envs != 0 {
        return Err(Error::shape(format!(
            "rewards: {} entries do not split into {n_envs} env columns",
            rewards.len()
        )));
    }
    let n_steps = rewards.len() / n_envs;
    if dones.len() != rewards.len() {
        return Err(Error::shape(format!(
            "dones: expected {}, got {}",
            rewards.len(),
            dones.len()
        )));
    }
    if values.len() != (n_steps + 1) * n_envs {
        return Err(Error::shape(format!(
            "values: expected {} (one bootstrap row), got {}",
            (n_steps + 1) * n_envs,
            values.len()
        )));
    }
    let mut adv = vec![0.0; rewards.len()];
    for e in 0..n_envs {
        let mut next_adv = 0.0;
        for t in (0..n_steps).rev() {
            let i = t * n_envs + e;
            let keep = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * values[i + n_envs] * keep - values[i];
            next_adv = delta + gamma * lambda * keep * next_adv;
            adv[i] = next_adv;
        }
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Shift and scale to zero mean and unit (population) variance. Leaves the
/// data centred only when the spread is degenerate.
pub fn standardize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in x.iter_mut() {
        *v -= mean;
        if std > 1e-8 {
            *v /= std;
        }
    }
}
