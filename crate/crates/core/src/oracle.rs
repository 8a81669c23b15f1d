//! Brute-force reference rewards.
//!
//! Everything here is recomputed from scratch with plain loops: networks are
//! evaluated from their exported weights, neighbours are found by sorting all
//! distances, and episodic state is rebuilt by replaying the whole history.
//! Nothing is shared with the reward modules themselves.

use std::collections::BTreeMap;

use crate::batch::RolloutBatch;
use crate::error::{Error, Result};
use crate::neural::{Activation, Network};
use crate::rewards::{IntrinsicReward, RewardKind, RewardParams};
use crate::rng::Rng;

const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// `w[i * outputs + j]` connects input `i` to output `j`.
    w: Vec<f64>,
    b: Vec<f64>,
    act: Activation,
}

/// Frozen copy of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    pub fn of(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, spec)| {
                let (w, b) = net.layer_params(l);
                Dense {
                    inputs: spec.inputs,
                    outputs: spec.outputs,
                    w: w.to_vec(),
                    b: b.to_vec(),
                    act: spec.activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.b.clone();
            for j in 0..layer.outputs {
                for i in 0..layer.inputs {
                    z[j] += h[i] * layer.w[i * layer.outputs + j];
                }
                z[j] = match layer.act {
                    Activation::Relu => {
                        if z[j] > 0.0 {
                            z[j]
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => z[j].tanh(),
                    Activation::Identity => z[j],
                };
            }
            h = z;
        }
        h
    }
}

/// Weights of every network of a module, by name.
pub type Weights = BTreeMap<String, Mlp>;

pub fn snapshot(module: &dyn IntrinsicReward) -> Weights {
    module
        .networks()
        .into_iter()
        .map(|(name, net)| (name, Mlp::of(net)))
        .collect()
}

fn net<'a>(w: &'a Weights, name: &str) -> Result<&'a Mlp> {
    w.get(name)
        .ok_or_else(|| Error::NotFound(format!("oracle needs network '{name}'")))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// The `k` smallest distances from `q` to `pool`, ascending.
fn nearest(q: &[f64], pool: &[&[f64]], k: usize) -> Vec<f64> {
    let mut d: Vec<f64> = pool.iter().map(|p| dist(q, p)).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.truncate(k);
    d
}

fn row(data: &[f64], i: usize, dim: usize) -> &[f64] {
    &data[i * dim..(i + 1) * dim]
}

fn embed_rows(enc: &Mlp, data: &[f64], dim: usize) -> Vec<Vec<f64>> {
    (0..data.len() / dim).map(|i| enc.apply(row(data, i, dim))).collect()
}

fn pooled(batch: &RolloutBatch, enc: &Mlp, k: usize, score: impl Fn(f64) -> f64) -> Vec<f64> {
    let e = embed_rows(enc, &batch.observations, batch.obs_dim);
    (0..e.len())
        .map(|i| {
            let others: Vec<&[f64]> = (0..e.len()).filter(|&j| j != i).map(|j| e[j].as_slice()).collect();
            let d = nearest(&e[i], &others, k);
            d.iter().map(|&x| score(x)).sum::<f64>() / d.len() as f64
        })
        .collect()
}

/// Soft visit counts for a chronological list of `(env, episode, embedding)`
/// queries. Each query sees the earlier queries of the same env and episode.
fn replay_counts(queries: &[(usize, u64, Vec<f64>)], k: usize, eps: f64) -> Vec<f64> {
    let mut all_d = Vec::new();
    let mut out = Vec::with_capacity(queries.len());
    for (q, (env, ep, e)) in queries.iter().enumerate() {
        let memory: Vec<&[f64]> = queries[..q]
            .iter()
            .filter(|(en, p, _)| en == env && p == ep)
            .map(|(_, _, m)| m.as_slice())
            .collect();
        let d = nearest(e, &memory, k);
        all_d.extend_from_slice(&d);
        let dm = if all_d.is_empty() {
            0.0
        } else {
            all_d.iter().sum::<f64>() / all_d.len() as f64
        };
        let mut n = 1.0;
        for &x in &d {
            n += if x == 0.0 { 1.0 } else { eps / (x * x / (dm * dm) + eps) };
        }
        out.push(n);
    }
    out
}

fn rnd_errors(batch: &RolloutBatch, w: &Weights) -> Result<Vec<f64>> {
    let target = net(w, "rnd.target")?;
    let pred = net(w, "rnd.predictor")?;
    Ok((0..batch.rows())
        .map(|i| {
            let x = row(&batch.next_observations, i, batch.obs_dim);
            sq_dist(&target.apply(x), &pred.apply(x))
        })
        .collect())
}

/// Expected rewards for each batch of a history fed in order to a freshly
/// built module. `steps[i].1` holds the module's weights just before batch `i`.
pub fn expected(kind: RewardKind, p: &RewardParams, steps: &[(RolloutBatch, Weights)]) -> Result<Vec<Vec<f64>>> {
    match kind {
        RewardKind::Identity => Ok(steps.iter().map(|(b, _)| vec![0.0; b.rows()]).collect()),
        RewardKind::Re3 => steps
            .iter()
            .map(|(b, w)| Ok(pooled(b, net(w, "encoder")?, p.re3.k, |d| (d + 1.0).ln())))
            .collect(),
        RewardKind::Rise => {
            let e = 1.0 - p.rise.alpha;
            steps
                .iter()
                .map(|(b, w)| Ok(pooled(b, net(w, "encoder")?, p.rise.k, |d| d.max(FLOOR).powf(e))))
                .collect()
        }
        RewardKind::Revd => revd(p, steps),
        RewardKind::PseudoCounts => {
            let mut queries = Vec::new();
            for (b, w) in steps {
                let enc = net(w, "encoder")?;
                for i in 0..b.rows() {
                    queries.push((i % b.n_envs, b.episode_ids[i], enc.apply(row(&b.next_observations, i, b.obs_dim))));
                }
            }
            let counts = replay_counts(&queries, p.pseudo_counts.k, p.kernel_eps);
            Ok(split(steps, counts.iter().map(|n| 1.0 / n.sqrt()).collect()))
        }
        RewardKind::Ride => {
            let mut queries = Vec::new();
            let mut change = Vec::new();
            for (b, w) in steps {
                let enc = net(w, "dynamics.encoder")?;
                for i in 0..b.rows() {
                    if b.dones[i] {
                        continue;
                    }
                    let e = enc.apply(row(&b.observations, i, b.obs_dim));
                    let e2 = enc.apply(row(&b.next_observations, i, b.obs_dim));
                    change.push(dist(&e, &e2));
                    queries.push((i % b.n_envs, b.episode_ids[i], e2));
                }
            }
            let counts = replay_counts(&queries, p.ride.k, p.kernel_eps);
            let mut it = change.iter().zip(&counts);
            let mut out = Vec::new();
            for (b, _) in steps {
                out.push(
                    (0..b.rows())
                        .map(|i| {
                            if b.dones[i] {
                                0.0
                            } else {
                                let (c, n) = it.next().unwrap();
                                c / n.sqrt()
                            }
                        })
                        .collect(),
                );
            }
            Ok(out)
        }
        RewardKind::Icm => steps
            .iter()
            .map(|(b, w)| {
                let enc = net(w, "dynamics.encoder")?;
                let fwd = net(w, "dynamics.forward")?;
                let n_actions = fwd.input_width() - enc.output_width();
                Ok((0..b.rows())
                    .map(|i| {
                        if b.dones[i] {
                            return 0.0;
                        }
                        let mut x = enc.apply(row(&b.observations, i, b.obs_dim));
                        let mut one_hot = vec![0.0; n_actions];
                        one_hot[b.actions[i] as usize] = 1.0;
                        x.extend(one_hot);
                        let target = enc.apply(row(&b.next_observations, i, b.obs_dim));
                        sq_dist(&fwd.apply(&x), &target)
                    })
                    .collect())
            })
            .collect(),
        RewardKind::Rnd => steps.iter().map(|(b, w)| rnd_errors(b, w)).collect(),
        RewardKind::Ngu => {
            let mut seen: Vec<f64> = Vec::new();
            let mut queries = Vec::new();
            let mut factors = Vec::new();
            for (b, w) in steps {
                let err = rnd_errors(b, w)?;
                seen.extend_from_slice(&err);
                let n = seen.len() as f64;
                let mean = seen.iter().sum::<f64>() / n;
                let std = (seen.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
                for &e in &err {
                    let a = if std > 1e-8 { 1.0 + (e - mean) / std } else { 1.0 };
                    factors.push(a.max(1.0).min(p.ngu.clip));
                }
                let enc = net(w, "encoder")?;
                for i in 0..b.rows() {
                    queries.push((i % b.n_envs, b.episode_ids[i], enc.apply(row(&b.next_observations, i, b.obs_dim))));
                }
            }
            let counts = replay_counts(&queries, p.ngu.k, p.kernel_eps);
            Ok(split(
                steps,
                factors.iter().zip(&counts).map(|(a, n)| a / n.sqrt()).collect(),
            ))
        }
    }
}

fn split(steps: &[(RolloutBatch, Weights)], flat: Vec<f64>) -> Vec<Vec<f64>> {
    let mut it = flat.into_iter();
    steps
        .iter()
        .map(|(b, _)| it.by_ref().take(b.rows()).collect())
        .collect()
}

fn revd(p: &RewardParams, steps: &[(RolloutBatch, Weights)]) -> Result<Vec<Vec<f64>>> {
    let expo = 1.0 - p.revd.alpha;
    // Per env, every (episode, embedding) seen so far.
    let mut history: Vec<Vec<(u64, Vec<f64>)>> = Vec::new();
    let mut out = Vec::new();
    for (b, w) in steps {
        let enc = net(w, "encoder")?;
        if history.len() < b.n_envs {
            history.resize(b.n_envs, Vec::new());
        }
        let mut scores = Vec::with_capacity(b.rows());
        for i in 0..b.rows() {
            let env = i % b.n_envs;
            let ep = b.episode_ids[i];
            let e = enc.apply(row(&b.observations, i, b.obs_dim));
            let h = &history[env];
            let current: Vec<&[f64]> = h.iter().filter(|(x, _)| *x == ep).map(|(_, v)| v.as_slice()).collect();
            let prev_ep = h.iter().rev().map(|(x, _)| *x).find(|&x| x != ep);
            let former: Vec<&[f64]> = match prev_ep {
                Some(pe) => h.iter().filter(|(x, _)| *x == pe).map(|(_, v)| v.as_slice()).collect(),
                None => Vec::new(),
            };
            let k = p.revd.k.min(current.len()).min(former.len());
            let score = if k == 0 {
                0.0
            } else {
                let df = nearest(&e, &former, k);
                let dc = nearest(&e, &current, k);
                let mut s = 0.0;
                for j in 0..k {
                    s += (df[j].max(FLOOR) / dc[j].max(FLOOR)).powf(expo);
                }
                s / k as f64
            };
            scores.push(score);
            history[env].push((ep, e));
        }
        out.push(scores);
    }
    Ok(out)
}

/// Feed `batches` to `module` in order, returning what it produced and what
/// the oracle expects.
pub fn run_against(
    module: &mut dyn IntrinsicReward,
    params: &RewardParams,
    batches: &[RolloutBatch],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut steps = Vec::with_capacity(batches.len());
    let mut actual = Vec::with_capacity(batches.len());
    for b in batches {
        let w = snapshot(module);
        actual.push(module.compute(b)?);
        steps.push((b.clone(), w));
    }
    let want = expected(module.kind(), params, &steps)?;
    Ok((actual, want))
}

/// Largest absolute difference and where it occurs (`batch`, `row`).
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, Option<(usize, usize)>) {
    let mut worst = (0.0, None);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() {
            return (f64::INFINITY, Some((i, x.len().min(y.len()))));
        }
        for (j, (u, v)) in x.iter().zip(y).enumerate() {
            let d = (u - v).abs();
            if d > worst.0 || d.is_nan() {
                worst = (if d.is_nan() { f64::INFINITY } else { d }, Some((i, j)));
            }
        }
    }
    worst
}

/// Shape of a randomly drawn test case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseShape {
    pub batches: usize,
    pub n_steps: usize,
    pub n_envs: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
}

impl CaseShape {
    /// Compact cases for golden files.
    pub fn draw_small(rng: &mut Rng) -> Self {
        Self {
            batches: rng.range(1, 3),
            n_steps: rng.range(2, 9),
            n_envs: rng.range(1, 4),
            obs_dim: rng.range(1, 5),
            n_actions: rng.range(2, 6),
        }
    }

    /// Sizes within `T <= 32`, `n_envs <= 4` and a short history.
    pub fn draw(rng: &mut Rng) -> Self {
        Self {
            batches: rng.range(1, 4),
            n_steps: rng.range(2, 33),
            n_envs: rng.range(1, 5),
            obs_dim: rng.range(1, 7),
            n_actions: rng.range(2, 6),
        }
    }
}

/// Consecutive rollouts with episode ids carried across batches. States come
/// from a coarse lattice so exact repeats (zero distances) occur.
pub fn random_rollouts(shape: CaseShape, rng: &mut Rng) -> Result<Vec<RolloutBatch>> {
    let CaseShape {
        batches,
        n_steps,
        n_envs,
        obs_dim,
        n_actions,
    } = shape;
    let draw_state = |rng: &mut Rng| -> Vec<f64> {
        (0..obs_dim)
            .map(|_| if rng.uniform() < 0.5 { rng.below(3) as f64 - 1.0 } else { rng.normal() })
            .collect()
    };
    let mut current: Vec<Vec<f64>> = (0..n_envs).map(|_| draw_state(rng)).collect();
    let mut start = vec![0u64; n_envs];
    let mut out = Vec::with_capacity(batches);
    for _ in 0..batches {
        let rows = n_steps * n_envs;
        let mut obs = Vec::with_capacity(rows * obs_dim);
        let mut next = Vec::with_capacity(rows * obs_dim);
        let mut actions = Vec::with_capacity(rows);
        let mut dones = Vec::with_capacity(rows);
        let mut rewards = Vec::with_capacity(rows);
        for _ in 0..n_steps {
            for cur in current.iter_mut() {
                let s_next = if rng.uniform() < 0.25 { cur.clone() } else { draw_state(rng) };
                let done = rng.uniform() < 0.15;
                obs.extend_from_slice(cur);
                next.extend_from_slice(&s_next);
                actions.push(rng.below(n_actions) as i64);
                dones.push(done);
                rewards.push(if done { rng.uniform() } else { 0.0 });
                *cur = if done { draw_state(rng) } else { s_next };
            }
        }
        let ids = RolloutBatch::episode_ids_from_dones(n_steps, n_envs, &dones, &start);
        for (env, s) in start.iter_mut().enumerate() {
            let last = (n_steps - 1) * n_envs + env;
            *s = ids[last] + u64::from(dones[last]);
        }
        out.push(RolloutBatch::new(
            n_steps,
            n_envs,
            vec![obs_dim],
            obs,
            actions,
            rewards,
            next,
            dones,
            ids,
        )?);
    }
    Ok(out)
}

/// Small-network parameters for oracle cases (`embed_dim <= 8`).
pub fn case_params(rng: &mut Rng) -> RewardParams {
    let mut p = RewardParams {
        embed_dim: rng.range(1, 9),
        hidden: rng.range(2, 9),
        ..RewardParams::default()
    };
    p.re3.k = rng.range(1, 6);
    p.rise.k = rng.range(1, 6);
    p.rise.alpha = [0.05, 0.5, 2.0][rng.below(3)];
    p.revd.k = rng.range(1, 6);
    p.revd.alpha = [0.05, 0.5, 1.5][rng.below(3)];
    p.ride.k = rng.range(1, 6);
    p.pseudo_counts.k = rng.range(1, 6);
    p.ngu.k = rng.range(1, 6);
    p.rnd.out_dim = rng.range(1, 6);
    p
}
