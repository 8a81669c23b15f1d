//! Golden reward files: random rollouts paired with oracle rewards.
//!
//! Each case is one JSON file holding the module's construction inputs, a
//! short history of batches and the rewards expected for every batch when the
//! history is fed to a freshly built module.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch::RolloutBatch;
use crate::error::{Error, Result};
use crate::oracle::{case_params, max_abs_diff, random_rollouts, run_against, CaseShape};
use crate::rewards::{build, RewardKind, RewardParams};
use crate::rng::{streams, Rng};

pub const DEFAULT_CASES: usize = 100;
/// Agreement required between a module and its oracle when generating.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub module: RewardKind,
    /// Seed passed to [`build`].
    pub seed: u64,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub params: RewardParams,
    pub batches: Vec<RolloutBatch>,
    pub expected: Vec<Vec<f64>>,
}

impl Fixture {
    /// Rebuild the module, replay the batches and return the largest
    /// deviation from the stored rewards.
    pub fn replay(&self) -> Result<f64> {
        let mut m = build(self.module, self.obs_dim, self.n_actions, &self.params, self.seed)?;
        let got = self
            .batches
            .iter()
            .map(|b| m.compute(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(max_abs_diff(&got, &self.expected).0)
    }
}

/// `count` cases for `kind`. Fails on the first case where the module and
/// the oracle disagree beyond [`TOLERANCE`].
pub fn generate(kind: RewardKind, seed: u64, count: usize) -> Result<Vec<Fixture>> {
    let index = RewardKind::ALL.iter().position(|&k| k == kind).unwrap() as u64;
    let mut rng = Rng::new(seed, streams::FIXTURE_BASE + index);
    (0..count)
        .map(|case| {
            let shape = CaseShape::draw_small(&mut rng);
            let params = case_params(&mut rng);
            let batches = random_rollouts(shape, &mut rng)?;
            let module_seed = rng.next_seed();
            let mut m = build(kind, shape.obs_dim, shape.n_actions, &params, module_seed)?;
            let (got, want) = run_against(m.as_mut(), &params, &batches)?;
            let (diff, at) = max_abs_diff(&got, &want);
            if diff > TOLERANCE {
                let (b, r) = at.unwrap_or_default();
                return Err(Error::Numeric(format!(
                    "{kind} case {case}: batch {b} row {r}: module {} vs oracle {} (diff {diff:e})",
                    got[b].get(r).copied().unwrap_or(f64::NAN),
                    want[b].get(r).copied().unwrap_or(f64::NAN),
                )));
            }
            Ok(Fixture {
                module: kind,
                seed: module_seed,
                obs_dim: shape.obs_dim,
                n_actions: shape.n_actions,
                params,
                batches,
                expected: want,
            })
        })
        .collect()
}

/// Write cases to `root/<module>/NNN.json`, replacing what is there.
pub fn write(root: &Path, fixtures: &[Fixture]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(fixtures.len());
    for (i, f) in fixtures.iter().enumerate() {
        let dir = root.join(f.module.name());
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{i:03}.json"));
        let mut text = serde_json::to_string_pretty(f)?;
        text.push('\n');
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Every case under `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<Fixture>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
        })
        .collect()
}
