use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cbandits::bounds::{bound_table, BoundError, BoundInputs};
use cbandits::experiment::{self, preset_summary, write_csv, write_svg, PolicyRun, JOBS_ENV, PRESET_NAMES};
use cbandits::{MegaParams, Scenario};
use clap::{Args, Parser, Subcommand};

/// Multi-user bandit simulations and regret bounds.
#[derive(Parser)]
#[command(name = "cbandits", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a scenario file and write one CSV per policy.
    Simulate(SimulateArgs),
    /// Print every regret bound for the given inputs.
    Bounds(BoundsArgs),
    /// List the built-in presets, or print one as a scenario file.
    Presets {
        /// Print this preset as TOML.
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in preset (see `presets`).
    #[arg(long, value_name = "NAME", conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record every this many rounds.
    #[arg(long)]
    stride: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = JOBS_ENV)]
    jobs: Option<usize>,
    /// Also write `<name>.svg` with all policies.
    #[arg(long)]
    emit_svg: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Number of arms K.
    #[arg(long, default_value_t = 9)]
    arms: usize,
    /// Number of users N.
    #[arg(long, default_value_t = 6)]
    users: usize,
    /// Round t at which the bounds are evaluated.
    #[arg(long, default_value_t = 10_000)]
    t: u64,
    #[arg(long, default_value_t = MegaParams::default().c)]
    c: f64,
    #[arg(long, default_value_t = MegaParams::default().d)]
    d: f64,
    #[arg(long, default_value_t = MegaParams::default().p0)]
    p0: f64,
    #[arg(long, default_value_t = MegaParams::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = MegaParams::default().beta)]
    beta: f64,
    /// Learning time T, or `auto` to derive it from --eps-rank and --delta.
    #[arg(long, default_value = "1000", value_parser = parse_learning_time)]
    learning_time: LearningTime,
    #[arg(long, default_value_t = 0.05)]
    eps_rank: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
}

#[derive(Clone, Copy)]
struct LearningTime(Option<u64>);

fn parse_learning_time(s: &str) -> Result<LearningTime, String> {
    if s == "auto" {
        return Ok(LearningTime(None));
    }
    s.parse().map(|v| LearningTime(Some(v))).map_err(|e| format!("expected a round count or `auto`: {e}"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Bounds(args) => {
            bounds(&args);
            Ok(())
        }
        Command::Presets { dump: Some(name) } => {
            print!("{}", experiment::to_toml(&experiment::preset(&name)?)?);
            Ok(())
        }
        Command::Presets { dump: None } => {
            for name in PRESET_NAMES {
                println!("{name:6} {}", preset_summary(name).unwrap_or_default());
            }
            Ok(())
        }
    }
}

fn load_scenario(args: &SimulateArgs) -> Result<Scenario> {
    let mut s = match (&args.scenario, &args.config) {
        (Some(name), _) => experiment::preset(name)?,
        (None, Some(path)) => experiment::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, None) => bail!("one of --scenario or --config is required"),
    };
    s.horizon = args.horizon.unwrap_or(s.horizon);
    s.repetitions = args.reps.unwrap_or(s.repetitions);
    s.seed = args.seed.unwrap_or(s.seed);
    s.stride = args.stride.unwrap_or(s.stride);
    s.validate()?;
    Ok(s)
}

/// File stem per policy: its label, numbered when a label repeats.
fn policy_stems(runs: &[PolicyRun]) -> Vec<String> {
    let mut total: HashMap<&str, usize> = HashMap::new();
    for r in runs {
        *total.entry(r.policy.label()).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    runs.iter()
        .map(|r| {
            let label = r.policy.label();
            let i = seen.entry(label).or_default();
            *i += 1;
            if total[label] > 1 {
                format!("{label}-{i}")
            } else {
                label.to_string()
            }
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&args)?;
    let jobs = args.jobs.filter(|&j| j > 0).unwrap_or_else(experiment::default_jobs);
    eprintln!(
        "{}: K={}, {} users, horizon {}, {} repetitions, seed {}, {} jobs",
        scenario.name,
        scenario.arms.len(),
        scenario.users.len(),
        scenario.horizon,
        scenario.repetitions,
        scenario.seed,
        jobs
    );
    let runs = experiment::run_scenario(&scenario, jobs)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let stems = policy_stems(&runs);
    if runs.iter().all(|r| r.aggregate.is_empty()) {
        eprintln!("nothing recorded: horizon {} is shorter than the stride {}", scenario.horizon, scenario.stride);
        return Ok(());
    }
    for (run, stem) in runs.iter().zip(&stems) {
        let path = args.out.join(format!("{}_{stem}.csv", scenario.name));
        write_csv(&run.aggregate, &path).with_context(|| format!("writing {}", path.display()))?;
        let a = &run.aggregate;
        let last = a.times.len() - 1;
        println!(
            "{stem:12} t={:<8} pseudo-regret {:.2} ± {:.2}  collisions/user {:.2}  -> {}",
            a.times[last],
            a.pseudo_regret.mean[last],
            a.pseudo_regret.std[last],
            a.collisions_per_user.mean[last],
            path.display()
        );
    }
    if args.emit_svg {
        let path = args.out.join(format!("{}.svg", scenario.name));
        let curves: Vec<(&str, _)> = stems.iter().map(String::as_str).zip(runs.iter().map(|r| &r.aggregate)).collect();
        write_svg(&scenario.name, &curves, &path).with_context(|| format!("writing {}", path.display()))?;
        println!("plot -> {}", path.display());
    }
    Ok(())
}

fn bounds(args: &BoundsArgs) {
    let inputs = BoundInputs {
        arms: args.arms,
        users: args.users,
        t: args.t,
        params: MegaParams { c: args.c, d: args.d, p0: args.p0, alpha: args.alpha, beta: args.beta },
        learning_time: args.learning_time.0,
        eps_rank: args.eps_rank,
        delta: args.delta,
    };
    println!(
        "K={} N={} t={} c={} d={} p0={} alpha={} beta={} T={} eps_rank={} delta={}",
        inputs.arms,
        inputs.users,
        inputs.t,
        args.c,
        args.d,
        args.p0,
        args.alpha,
        args.beta,
        inputs.learning_time.map_or("auto".to_string(), |t| t.to_string()),
        inputs.eps_rank,
        inputs.delta
    );
    for row in bound_table(&inputs) {
        match row.value {
            Ok(v) => println!("{:30} {}", row.name, format_value(v)),
            Err(BoundError::OutsideValidity(why)) => println!("{:30} outside validity ({why})", row.name),
            Err(e) => println!("{:30} error: {e}", row.name),
        }
    }
}

fn format_value(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e7 || v.abs() < 1e-3) {
        format!("{v:.6e}")
    } else {
        format!("{v:.6}")
    }
}
