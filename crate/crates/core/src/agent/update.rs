//! Loss functions with their exact parameter gradients.

use crate::error::{Error, Result};
use crate::neural::{Categorical, Matrix, PolicyNet, TwoHeadValueNet};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyLoss {
    /// Negated surrogate objective.
    pub policy: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// Advantage-head regression loss (clipped-surrogate mode only).
    pub advantage: f64,
    /// Quantity the gradients minimise.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValueLoss {
    pub loss_e: f64,
    pub loss_ei: f64,
    pub total: f64,
}

fn check_rows(what: &str, got: usize, rows: usize) -> Result<()> {
    if got != rows {
        return Err(Error::shape(format!("{what}: expected {rows} rows, got {got}")));
    }
    Ok(())
}

fn action_index(a: i64, n: usize) -> Result<usize> {
    if a < 0 || a as usize >= n {
        return Err(Error::Argument(format!("action {a} outside 0..{n}")));
    }
    Ok(a as usize)
}

/// `-mean(log pi(a|s) * A) - entropy_coef * mean(H)`.
pub fn policy_gradient_loss(
    policy: &PolicyNet,
    obs: &Matrix,
    actions: &[i64],
    advantages: &[f64],
    entropy_coef: f64,
) -> Result<(PolicyLoss, Vec<Vec<f64>>)> {
    let n = obs.rows();
    check_rows("actions", actions.len(), n)?;
    check_rows("advantages", advantages.len(), n)?;
    let (out, tape) = policy.forward_tape(obs)?;
    let k = policy.n_actions();
    let inv_n = 1.0 / n as f64;
    let mut d_logits = Matrix::zeros(n, k);
    let mut pg = 0.0;
    let mut entropy = 0.0;
    for i in 0..n {
        let a = action_index(actions[i], k)?;
        let d = Categorical::from_logits(out.logits.row(i));
        pg -= d.log_prob(a) * advantages[i] * inv_n;
        entropy += d.entropy() * inv_n;
        let g_lp = d.grad_log_prob(a);
        let g_h = d.grad_entropy();
        for j in 0..k {
            d_logits.set(i, j, -advantages[i] * inv_n * g_lp[j] - entropy_coef * inv_n * g_h[j]);
        }
    }
    let grads = policy.backward(&tape, &d_logits, None)?;
    let loss = PolicyLoss {
        policy: pg,
        entropy,
        advantage: 0.0,
        total: pg - entropy_coef * entropy,
    };
    Ok((loss, grads))
}

/// Clipped surrogate with entropy bonus and advantage-head regression:
/// `-mean(min(r A, clip(r) A)) - entropy_coef * mean(H) + adv_coef * mean((A_theta(s, a) - A)^2)`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    policy: &PolicyNet,
    obs: &Matrix,
    actions: &[i64],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
    adv_coef: f64,
) -> Result<(PolicyLoss, Vec<Vec<f64>>)> {
    let n = obs.rows();
    check_rows("actions", actions.len(), n)?;
    check_rows("old_log_probs", old_log_probs.len(), n)?;
    check_rows("advantages", advantages.len(), n)?;
    let (out, tape) = policy.forward_tape(obs)?;
    let adv_pred = out
        .advantages
        .as_ref()
        .ok_or_else(|| Error::State("clipped-surrogate loss needs a policy with an advantage head".into()))?;
    let k = policy.n_actions();
    let inv_n = 1.0 / n as f64;
    let mut d_logits = Matrix::zeros(n, k);
    let mut d_adv = Matrix::zeros(n, k);
    let (mut surr, mut entropy, mut adv_loss) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let a = action_index(actions[i], k)?;
        let d = Categorical::from_logits(out.logits.row(i));
        let ratio = (d.log_prob(a) - old_log_probs[i]).exp();
        let adv = advantages[i];
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        surr -= (ratio * adv).min(clipped * adv) * inv_n;
        // The unclipped branch carries gradient only where it is the minimum
        // strictly inside the trust region.
        let active = (adv > 0.0 && ratio < 1.0 + clip) || (adv < 0.0 && ratio > 1.0 - clip);
        let d_logp = if active { -ratio * adv * inv_n } else { 0.0 };
        entropy += d.entropy() * inv_n;
        let g_lp = d.grad_log_prob(a);
        let g_h = d.grad_entropy();
        for j in 0..k {
            d_logits.set(i, j, d_logp * g_lp[j] - entropy_coef * inv_n * g_h[j]);
        }
        let diff = adv_pred.get(i, a) - adv;
        adv_loss += diff * diff * inv_n;
        d_adv.set(i, a, adv_coef * 2.0 * diff * inv_n);
    }
    let grads = policy.backward(&tape, &d_logits, Some(&d_adv))?;
    let loss = PolicyLoss {
        policy: surr,
        entropy,
        advantage: adv_loss,
        total: surr - entropy_coef * entropy + adv_coef * adv_loss,
    };
    Ok((loss, grads))
}

/// `value_coef * (mean (V^E - t_E)^2 + mean (V^{E+I} - t_{E+I})^2)`; the
/// second term is dropped when `targets_ei` is `None`.
pub fn value_loss(
    value: &TwoHeadValueNet,
    obs: &Matrix,
    targets_e: &[f64],
    targets_ei: Option<&[f64]>,
    value_coef: f64,
) -> Result<(ValueLoss, Vec<Vec<f64>>)> {
    let n = obs.rows();
    check_rows("targets_e", targets_e.len(), n)?;
    if let Some(t) = targets_ei {
        check_rows("targets_ei", t.len(), n)?;
    }
    let (out, tape) = value.forward_tape(obs)?;
    let inv_n = 1.0 / n as f64;
    let mut d_e = vec![0.0; n];
    let mut d_ei = vec![0.0; n];
    let (mut loss_e, mut loss_ei) = (0.0, 0.0);
    for i in 0..n {
        let diff = out.extrinsic[i] - targets_e[i];
        loss_e += diff * diff * inv_n;
        d_e[i] = value_coef * 2.0 * diff * inv_n;
        if let Some(t) = targets_ei {
            let diff = out.total[i] - t[i];
            loss_ei += diff * diff * inv_n;
            d_ei[i] = value_coef * 2.0 * diff * inv_n;
        }
    }
    let grads = value.backward(&tape, &d_e, &d_ei)?;
    Ok((
        ValueLoss {
            loss_e,
            loss_ei,
            total: value_coef * (loss_e + loss_ei),
        },
        grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn obs(rows: usize, dim: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(rows, dim, (0..rows * dim).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn zero_advantage_and_entropy_coef_gives_zero_gradient() {
        let mut rng = Rng::new(1, 1);
        let p = PolicyNet::new(3, &[8], 4, false, &mut rng).unwrap();
        let x = obs(5, 3, &mut rng);
        let (_, g) = policy_gradient_loss(&p, &x, &[0, 1, 2, 3, 0], &[0.0; 5], 0.0).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn near_uniform_entropy() {
        let mut rng = Rng::new(2, 2);
        let p = PolicyNet::new(3, &[8], 5, false, &mut rng).unwrap();
        let x = obs(4, 3, &mut rng);
        let (l, _) = policy_gradient_loss(&p, &x, &[0; 4], &[0.0; 4], 0.01).unwrap();
        assert!((l.entropy - 5f64.ln()).abs() < 1e-3);
        assert!(l.entropy <= 5f64.ln());
    }

    #[test]
    fn clipped_ratio_has_no_surrogate_gradient() {
        let mut rng = Rng::new(3, 3);
        let p = PolicyNet::new(2, &[4], 3, true, &mut rng).unwrap();
        let x = obs(1, 2, &mut rng);
        let lp = Categorical::from_logits(p.forward(&x).unwrap().logits.row(0)).log_prob(1);
        let grads_at = |ratio: f64| {
            ppo_loss(&p, &x, &[1], &[lp - ratio.ln()], &[1.0], 0.2, 0.0, 0.0)
                .unwrap()
                .1
        };
        let g15 = grads_at(1.5);
        let g125 = grads_at(1.25);
        assert_eq!(g15[0], g125[0]);
        assert!(g15[0].iter().all(|&v| v == 0.0));
        assert!(grads_at(1.0)[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn value_loss_zero_at_targets() {
        let mut rng = Rng::new(4, 4);
        let v = TwoHeadValueNet::new(3, &[8], true, &mut rng).unwrap();
        let x = obs(6, 3, &mut rng);
        let out = v.forward(&x).unwrap();
        let (l, g) = value_loss(&v, &x, &out.extrinsic, Some(&out.total), 0.5).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }
}
