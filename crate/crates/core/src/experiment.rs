//! Run directories: training to disk and reading runs back for evaluation.
//!
//! A run directory holds `config.resolved`, `runrecord.csv`, `selections.csv`
//! (when a reward pool is configured), `checkpoint.bin` and `manifest.json`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agent::{RunRecord, RunRecordWriter, Trainer};
use crate::bandit::{SelectionLog, SelectionRow};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, BootstrapSettings, CurvePoint, Report, ScoreMatrix};
use crate::neural::save_checkpoint;

pub const RUN_RECORDS: &str = "runrecord.csv";
pub const SELECTIONS: &str = "selections.csv";
pub const RESOLVED_CONFIG: &str = "config.resolved";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub wall_seconds: f64,
    pub updates: u64,
    pub env_steps: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// `git describe` of the working tree when available, else the crate version.
pub fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| format!("{pkg} ({})", s.trim()))
        .unwrap_or_else(|| pkg.to_string())
}

fn save_trainer_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    save_checkpoint(w, &trainer.named_networks())
}

/// Train `cfg` and write the run directory `out`.
pub fn train_to_dir(cfg: &TrainConfig, config_path: Option<&Path>, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join(RESOLVED_CONFIG), cfg.to_toml()?)?;
    let started = unix_now();
    let clock = Instant::now();

    let mut trainer = Trainer::new(&cfg.agent, &cfg.shaping, &cfg.rewards, cfg.env.variant, cfg.seed)?;
    let mut records = RunRecordWriter::new(BufWriter::new(File::create(out.join(RUN_RECORDS))?));
    let mut selections = match trainer.bandit() {
        Some(b) => Some(SelectionLog::new(
            BufWriter::new(File::create(out.join(SELECTIONS))?),
            b.arms(),
        )?),
        None => None,
    };
    let every = cfg.run.checkpoint_every;
    let result = trainer.run(cfg.run.updates, |t, o| {
        records.write(&o.record)?;
        if let (Some(log), Some(b), Some(arm)) = (selections.as_mut(), t.bandit(), o.arm) {
            log.write(&SelectionRow::snapshot(b, o.record.update, arm, o.record.beta))?;
        }
        if every > 0 && o.record.update % every == 0 {
            save_trainer_checkpoint(t, &out.join(format!("checkpoint_{:06}.bin", o.record.update)))?;
        }
        Ok(())
    });
    // Keep whatever was logged before a failure.
    records.flush()?;
    if let Some(log) = selections.as_mut() {
        log.flush()?;
    }
    result?;
    save_trainer_checkpoint(&trainer, &out.join(CHECKPOINT))?;

    let manifest = RunManifest {
        config: config_path.map(Path::to_path_buf),
        out_dir: out.to_path_buf(),
        version: version_string(),
        started_unix: started,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        updates: trainer.updates(),
        env_steps: trainer.env_steps(),
    };
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

/// A finished run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: TrainConfig,
    pub records: Vec<RunRecord>,
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = TrainConfig::load(dir.join(RESOLVED_CONFIG))?;
        let records = read_records(&dir.join(RUN_RECORDS))?;
        if records.is_empty() {
            return Err(Error::Format(format!("{}: no records", dir.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            records,
        })
    }

    pub fn task(&self) -> String {
        self.config.env.variant.to_string()
    }

    /// Mean return over the most recent episodes at the end of the run;
    /// 0 when no episode ever finished.
    pub fn final_score(&self) -> f64 {
        let r = self.records.last().unwrap().mean_ep_return;
        if r.is_finite() {
            r
        } else {
            0.0
        }
    }

    /// `(env_steps, mean_ep_return)` per update.
    pub fn curve(&self) -> Vec<(u64, f64)> {
        self.records.iter().map(|r| (r.env_steps, r.mean_ep_return)).collect()
    }

    /// Env steps at which the running mean return first reaches `level`.
    pub fn steps_to_reach(&self, level: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.mean_ep_return >= level)
            .map(|r| r.env_steps)
    }
}

/// Final scores grouped by task, tasks sorted by name.
pub fn score_matrix(method: &str, runs: &[LoadedRun]) -> Result<ScoreMatrix> {
    let mut tasks: Vec<String> = runs.iter().map(LoadedRun::task).collect();
    tasks.sort();
    tasks.dedup();
    let cols = tasks
        .iter()
        .map(|t| runs.iter().filter(|r| &r.task() == t).map(LoadedRun::final_score).collect())
        .collect();
    ScoreMatrix::new(method, tasks, cols)
}

pub struct Evaluation {
    pub report: Report,
    pub curve: Vec<CurvePoint>,
    pub baseline_curve: Option<Vec<CurvePoint>>,
}

pub fn evaluate(
    runs: &[LoadedRun],
    baseline: &[LoadedRun],
    settings: &BootstrapSettings,
    stride: usize,
) -> Result<Evaluation> {
    if runs.is_empty() {
        return Err(Error::Argument("at least one run directory is required".into()));
    }
    let x = score_matrix("method", runs)?;
    let y = if baseline.is_empty() {
        None
    } else {
        Some(score_matrix("baseline", baseline)?)
    };
    let report = metrics::report(&x, y.as_ref(), settings)?;
    let curve_of = |rs: &[LoadedRun]| metrics::curve(&rs.iter().map(LoadedRun::curve).collect::<Vec<_>>(), stride, settings);
    Ok(Evaluation {
        report,
        curve: curve_of(runs)?,
        baseline_curve: if baseline.is_empty() { None } else { Some(curve_of(baseline)?) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Variant;

    fn tiny(seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        cfg.env.variant = Variant::Empty(5);
        cfg.run.updates = 6;
        cfg.run.checkpoint_every = 3;
        cfg.agent.n_envs = 2;
        cfg.agent.hidden = vec![8];
        cfg.rewards.embed_dim = 4;
        cfg.rewards.hidden = 8;
        cfg
    }

    #[test]
    fn run_directory_contents_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        train_to_dir(&tiny(1), None, &a).unwrap();
        train_to_dir(&tiny(1), None, &b).unwrap();
        for f in [RUN_RECORDS, SELECTIONS, RESOLVED_CONFIG, CHECKPOINT, MANIFEST, "checkpoint_000003.bin"] {
            assert!(a.join(f).exists(), "{f} missing");
        }
        assert_eq!(fs::read(a.join(RUN_RECORDS)).unwrap(), fs::read(b.join(RUN_RECORDS)).unwrap());
        let run = LoadedRun::load(&a).unwrap();
        assert_eq!(run.records.len(), 6);
        assert_eq!(run.task(), "empty_5");
        assert_eq!(run.config, tiny(1));
    }

    #[test]
    fn self_comparison_is_even() {
        let dir = tempfile::tempdir().unwrap();
        train_to_dir(&tiny(2), None, dir.path()).unwrap();
        let run = LoadedRun::load(dir.path()).unwrap();
        let s = BootstrapSettings {
            resamples: 100,
            ..Default::default()
        };
        let ev = evaluate(std::slice::from_ref(&run), std::slice::from_ref(&run), &s, 2).unwrap();
        assert_eq!(ev.report.probability_of_improvement.unwrap().value, 0.5);
    }
}
