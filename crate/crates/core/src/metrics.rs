//! Aggregate statistics over runs and tasks with stratified bootstrap
//! confidence intervals.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, Rng};

pub const DEFAULT_RESAMPLES: usize = 2000;

fn non_empty(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Argument("empty score list".into()));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn mean(scores: &[f64]) -> Result<f64> {
    non_empty(scores)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn median(scores: &[f64]) -> Result<f64> {
    non_empty(scores)?;
    let s = sorted(scores);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

/// Mean of the scores left after dropping `floor(n / 4)` from each end.
pub fn iqm(scores: &[f64]) -> Result<f64> {
    non_empty(scores)?;
    let s = sorted(scores);
    let cut = s.len() / 4;
    let mid = &s[cut..s.len() - cut];
    Ok(mid.iter().sum::<f64>() / mid.len() as f64)
}

/// Mean shortfall below `threshold`.
pub fn optimality_gap(scores: &[f64], threshold: f64) -> Result<f64> {
    non_empty(scores)?;
    if !(threshold > 0.0) {
        return Err(Error::Argument(format!("threshold must be positive, got {threshold}")));
    }
    Ok(scores.iter().map(|&s| (threshold - s).max(0.0)).sum::<f64>() / scores.len() as f64)
}

/// Per-task ratio of a method's score to a baseline's.
pub fn normalized_score(score: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Argument(format!("baseline score must be positive, got {baseline}")));
    }
    Ok(score / baseline)
}

/// Linear-interpolated percentile, `q` in [0, 100], of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Scores of one method: `runs[t]` holds every run's score on `tasks[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub method: String,
    pub tasks: Vec<String>,
    pub runs: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(method: impl Into<String>, tasks: Vec<String>, runs: Vec<Vec<f64>>) -> Result<Self> {
        if tasks.is_empty() || tasks.len() != runs.len() {
            return Err(Error::Argument(format!(
                "{} tasks but {} score columns",
                tasks.len(),
                runs.len()
            )));
        }
        for (t, r) in tasks.iter().zip(&runs) {
            if r.is_empty() {
                return Err(Error::Argument(format!("task '{t}' has no runs")));
            }
            if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Argument(format!("task '{t}' has non-finite score {v}")));
            }
        }
        Ok(Self {
            method: method.into(),
            tasks,
            runs,
        })
    }

    /// Single-task matrix.
    pub fn single(method: impl Into<String>, task: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        Self::new(method, vec![task.into()], vec![scores])
    }

    pub fn flat(&self) -> Vec<f64> {
        self.runs.iter().flatten().copied().collect()
    }

    /// Resample runs with replacement within each task.
    pub fn resample(&self, rng: &mut Rng) -> ScoreMatrix {
        let runs = self
            .runs
            .iter()
            .map(|r| (0..r.len()).map(|_| r[rng.below(r.len())]).collect())
            .collect();
        ScoreMatrix {
            method: self.method.clone(),
            tasks: self.tasks.clone(),
            runs,
        }
    }

    fn check_same_tasks(&self, other: &ScoreMatrix) -> Result<()> {
        if self.tasks != other.tasks {
            return Err(Error::Argument(format!(
                "task sets differ: {:?} vs {:?}",
                self.tasks, other.tasks
            )));
        }
        Ok(())
    }
}

/// Mean over tasks of `P(x > y) + P(x = y) / 2` over all run pairs.
pub fn probability_of_improvement(x: &ScoreMatrix, y: &ScoreMatrix) -> Result<f64> {
    x.check_same_tasks(y)?;
    let mut total = 0.0;
    for (xs, ys) in x.runs.iter().zip(&y.runs) {
        let mut wins = 0.0;
        for &a in xs {
            for &b in ys {
                wins += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total += wins / (xs.len() * ys.len()) as f64;
    }
    Ok(total / x.tasks.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn interval(mut draws: Vec<f64>, level: f64) -> Interval {
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0 * 100.0;
    Interval {
        lo: percentile(&draws, tail),
        hi: percentile(&draws, 100.0 - tail),
    }
}

fn check_bootstrap(n_resamples: usize, level: f64) -> Result<()> {
    if n_resamples < 100 {
        return Err(Error::Argument(format!("need at least 100 resamples, got {n_resamples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// One seed per resample, drawn up front so the result does not depend on
/// thread scheduling.
fn resample_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = Rng::new(seed, streams::BOOTSTRAP);
    (0..n).map(|_| rng.next_seed()).collect()
}

/// Percentile interval of `statistic` over stratified bootstrap resamples.
pub fn bootstrap_ci<F>(statistic: F, scores: &ScoreMatrix, n_resamples: usize, level: f64, seed: u64) -> Result<Interval>
where
    F: Fn(&ScoreMatrix) -> Result<f64> + Sync,
{
    check_bootstrap(n_resamples, level)?;
    let draws = resample_seeds(seed, n_resamples)
        .into_par_iter()
        .map(|s| statistic(&scores.resample(&mut Rng::new(s, 0))))
        .collect::<Result<Vec<_>>>()?;
    Ok(interval(draws, level))
}

/// Bootstrap interval of a statistic of two methods, resampled independently.
pub fn bootstrap_ci_pair<F>(
    statistic: F,
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Interval>
where
    F: Fn(&ScoreMatrix, &ScoreMatrix) -> Result<f64> + Sync,
{
    check_bootstrap(n_resamples, level)?;
    let draws = resample_seeds(seed, n_resamples)
        .into_par_iter()
        .map(|s| {
            let mut rng = Rng::new(s, 0);
            let a = x.resample(&mut rng);
            let b = y.resample(&mut rng);
            statistic(&a, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(interval(draws, level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub method: String,
    pub runs: usize,
    pub median: Estimate,
    pub iqm: Estimate,
    pub mean: Estimate,
    pub optimality_gap: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            level: 0.95,
            seed: 0,
            threshold: 1.0,
        }
    }
}

fn estimate<F>(f: F, m: &ScoreMatrix, b: &BootstrapSettings) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let value = f(&m.flat())?;
    let ci = bootstrap_ci(|r| f(&r.flat()), m, b.resamples, b.level, b.seed)?;
    Ok(Estimate {
        value,
        lo: ci.lo,
        hi: ci.hi,
    })
}

pub fn aggregates(m: &ScoreMatrix, b: &BootstrapSettings) -> Result<Aggregates> {
    let t = b.threshold;
    Ok(Aggregates {
        method: m.method.clone(),
        runs: m.runs.iter().map(Vec::len).sum(),
        median: estimate(median, m, b)?,
        iqm: estimate(iqm, m, b)?,
        mean: estimate(mean, m, b)?,
        optimality_gap: estimate(|s| optimality_gap(s, t), m, b)?,
    })
}

pub fn improvement(x: &ScoreMatrix, y: &ScoreMatrix, b: &BootstrapSettings) -> Result<Estimate> {
    let value = probability_of_improvement(x, y)?;
    let ci = bootstrap_ci_pair(probability_of_improvement, x, y, b.resamples, b.level, b.seed)?;
    Ok(Estimate {
        value,
        lo: ci.lo,
        hi: ci.hi,
    })
}

/// Per-task mean score divided by the baseline's per-task mean.
pub fn normalized_task_scores(x: &ScoreMatrix, baseline: &ScoreMatrix) -> Result<Vec<(String, f64)>> {
    x.check_same_tasks(baseline)?;
    x.tasks
        .iter()
        .zip(x.runs.iter().zip(&baseline.runs))
        .map(|(t, (a, b))| Ok((t.clone(), normalized_score(mean(a)?, mean(b)?)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tasks: Vec<String>,
    pub bootstrap: BootstrapSettings,
    pub method: Aggregates,
    pub baseline: Option<Aggregates>,
    pub probability_of_improvement: Option<Estimate>,
    /// Absent when any baseline task mean is not positive.
    pub normalized_scores: Option<Vec<(String, f64)>>,
}

pub fn report(x: &ScoreMatrix, baseline: Option<&ScoreMatrix>, b: &BootstrapSettings) -> Result<Report> {
    let (base, poi, norm) = match baseline {
        Some(y) => (
            Some(aggregates(y, b)?),
            Some(improvement(x, y, b)?),
            normalized_task_scores(x, y).ok(),
        ),
        None => (None, None, None),
    };
    Ok(Report {
        tasks: x.tasks.clone(),
        bootstrap: *b,
        method: aggregates(x, b)?,
        baseline: base,
        probability_of_improvement: poi,
        normalized_scores: norm,
    })
}

/// One point of an aggregate learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_steps: u64,
    pub iqm: f64,
    pub iqm_lo: f64,
    pub iqm_hi: f64,
    pub median: f64,
    pub median_lo: f64,
    pub median_hi: f64,
}

/// Aggregate curve across runs. `series[r]` is `(env_steps, score)` for run
/// `r`; points are aligned by index and the shortest run bounds the curve.
/// Non-finite scores (no episode finished yet) count as 0. Every `stride`th
/// point is kept, plus the last.
pub fn curve(series: &[Vec<(u64, f64)>], stride: usize, b: &BootstrapSettings) -> Result<Vec<CurvePoint>> {
    if series.is_empty() {
        return Err(Error::Argument("no runs".into()));
    }
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx.into_iter()
        .map(|i| {
            let scores: Vec<f64> = series
                .iter()
                .map(|s| if s[i].1.is_finite() { s[i].1 } else { 0.0 })
                .collect();
            let m = ScoreMatrix::single("curve", "task", scores)?;
            let q = estimate(iqm, &m, b)?;
            let md = estimate(median, &m, b)?;
            Ok(CurvePoint {
                env_steps: series[0][i].0,
                iqm: q.value,
                iqm_lo: q.lo,
                iqm_hi: q.hi,
                median: md.value,
                median_lo: md.lo,
                median_hi: md.hi,
            })
        })
        .collect()
}

pub fn write_curve<W: Write>(w: W, points: &[CurvePoint]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for p in points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    Ok(())
}
