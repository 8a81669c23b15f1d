use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use airs::agent::TrainerMode;
use airs::config::TrainConfig;
use airs::experiment::{self, LoadedRun};
use airs::fixtures;
use airs::metrics::{self, BootstrapSettings};
use airs::rewards::RewardKind;
use airs::Error;

#[derive(Parser)]
#[command(name = "airs", version, about = "Adaptive intrinsic reward shaping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run.
    Train(TrainArgs),
    /// Train several seeds of one config concurrently.
    Sweep(SweepArgs),
    /// Aggregate finished runs into report.json and curves.csv.
    Eval(EvalArgs),
    /// Write oracle-checked golden reward files.
    GenFixtures(FixtureArgs),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; relative paths resolve under $AIRS_OUT_ROOT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "AIRS_OUT_ROOT", default_value = "runs")]
    out_root: PathBuf,
    /// a2c_advantage_injection, two_branch_value or daac.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated module names; `none` trains without a pool.
    #[arg(long)]
    reward_set: Option<String>,
    #[arg(long)]
    updates: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Seeds as `1,2,5` or an inclusive range `1..5`.
    #[arg(long, default_value = "1..5")]
    seeds: String,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directories of the method under evaluation.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    baseline: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Keep every n-th point of the learning curves.
    #[arg(long, default_value_t = 10)]
    stride: usize,
}

#[derive(Args)]
struct FixtureArgs {
    /// Module name or `all`.
    #[arg(long)]
    module: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = fixtures::DEFAULT_CASES)]
    count: usize,
    #[arg(long, default_value = "fixtures/rewards")]
    out: PathBuf,
}

fn parse_reward_set(s: &str) -> Result<Vec<RewardKind>, Error> {
    if s.trim().is_empty() || s.trim() == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|name| {
            name.parse()
                .map_err(|e: Error| Error::config("shaping.reward_set", e.to_string()))
        })
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Argument(format!("cannot parse seeds '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn resolve(o: &Overrides) -> Result<TrainConfig, Error> {
    let mut cfg = match &o.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = &o.mode {
        cfg.agent.mode = m.parse::<TrainerMode>()?;
    }
    if let Some(r) = &o.reward_set {
        cfg.shaping.reward_set = parse_reward_set(r)?;
    }
    if let Some(u) = o.updates {
        cfg.run.updates = u;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `--out`, or `<config stem>[_seed<n>]`, resolved under the output root.
fn out_dir(o: &Overrides, seed: Option<u64>) -> PathBuf {
    let name = match &o.out {
        Some(p) => p.clone(),
        None => {
            let stem = o
                .config
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
            PathBuf::from(match seed {
                Some(s) => format!("{stem}_seed{s}"),
                None => stem,
            })
        }
    };
    if name.is_absolute() {
        name
    } else {
        o.out_root.join(name)
    }
}

fn train(args: TrainArgs) -> Result<(), Error> {
    let mut cfg = resolve(&args.common)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = out_dir(&args.common, Some(cfg.seed));
    let m = experiment::train_to_dir(&cfg, args.common.config.as_deref(), &out)?;
    println!(
        "{}: {} updates, {} env steps in {:.1}s",
        out.display(),
        m.updates,
        m.env_steps,
        m.wall_seconds
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let base = resolve(&args.common)?;
    let seeds = parse_seeds(&args.seeds)?;
    let root = out_dir(&args.common, None);
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base.clone() };
            let out = root.join(format!("seed_{seed}"));
            experiment::train_to_dir(&cfg, args.common.config.as_deref(), &out).map_err(|e| e.context(format!("seed {seed}")))
        })
        .collect();
    for r in results {
        let m = r?;
        println!("{}: {} env steps in {:.1}s", m.out_dir.display(), m.env_steps, m.wall_seconds);
    }
    Ok(())
}

fn load_all(dirs: &[PathBuf]) -> Result<Vec<LoadedRun>, Error> {
    dirs.iter().map(|d| LoadedRun::load(d)).collect()
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    let runs = load_all(&args.runs)?;
    let baseline = load_all(&args.baseline)?;
    let settings = BootstrapSettings {
        resamples: args.resamples,
        level: 0.95,
        seed: args.seed,
        threshold: args.threshold,
    };
    let ev = experiment::evaluate(&runs, &baseline, &settings, args.stride)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&ev.report)? + "\n")?;
    metrics::write_curve(fs::File::create(args.out.join("curves.csv"))?, &ev.curve)?;
    if let Some(c) = &ev.baseline_curve {
        metrics::write_curve(fs::File::create(args.out.join("baseline_curves.csv"))?, c)?;
    }
    let m = &ev.report.method;
    println!(
        "IQM {:.4} [{:.4}, {:.4}]  median {:.4}  mean {:.4}  OG {:.4}",
        m.iqm.value, m.iqm.lo, m.iqm.hi, m.median.value, m.mean.value, m.optimality_gap.value
    );
    if let Some(p) = &ev.report.probability_of_improvement {
        println!("P(method > baseline) {:.4} [{:.4}, {:.4}]", p.value, p.lo, p.hi);
    }
    Ok(())
}

fn gen_fixtures(args: FixtureArgs) -> Result<(), Error> {
    let kinds = if args.module == "all" {
        RewardKind::ALL.to_vec()
    } else {
        vec![args.module.parse::<RewardKind>()?]
    };
    for kind in kinds {
        let cases = fixtures::generate(kind, args.seed, args.count)?;
        let paths = fixtures::write(&args.out, &cases)?;
        println!("{kind}: {} cases in {}", paths.len(), args.out.join(kind.name()).display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Argument(_) | Error::NotFound(_) | Error::Format(_) => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
        Command::GenFixtures(a) => gen_fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
