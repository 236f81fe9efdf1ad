//! Scenario descriptions, the reference presets and the parallel runner.

mod config;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{from_toml, load, to_toml};
pub use output::{render_svg, write_csv, write_csv_to, write_svg, CSV_HEADER};

use crate::env::{ArmSet, EnvError, Environment, UserId, UserSchedule, UserSpan};
use crate::metrics::{aggregate, top_arms, MetricsError, RegretTrace, TraceAggregate};
use crate::policy::{MegaParams, PolicyConfig, PolicyError};
use crate::rng::repetition_seed;
use crate::sim::{run_repetition, SimError};

/// Environment variable that overrides the default worker count.
pub const JOBS_ENV: &str = "CBANDITS_JOBS";

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_STRIDE: u64 = 100;
pub const DEFAULT_SEED: u64 = 2014;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("scenario needs at least one repetition")]
    NoRepetitions,
    #[error("scenario needs at least one policy")]
    NoPolicies,
    #[error("logging stride must be positive")]
    ZeroStride,
    #[error(
        "gap {gap:.4} between ranked arms {rank} and {next} is below d = {d}; \
         MEGA needs the top N+1 arms separated by at least d"
    )]
    GapBelowD { rank: usize, next: usize, gap: f64, d: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("repetition {rep} of {policy} failed: {source}")]
    Repetition { rep: u64, policy: &'static str, source: SimError },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("nothing to write: the aggregate has no rows")]
    EmptyAggregate,
}

/// A complete experiment: the bandit, who is present when, the policies being
/// compared (each run separately with every user on it) and run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub arms: Vec<f64>,
    pub horizon: u64,
    pub repetitions: u64,
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub stride: u64,
    pub policies: Vec<PolicyConfig>,
    pub users: Vec<UserSpan>,
}

fn default_stride() -> u64 {
    DEFAULT_STRIDE
}

impl Scenario {
    pub fn arm_set(&self) -> Result<ArmSet, EnvError> {
        ArmSet::bernoulli(self.arms.clone())
    }

    pub fn schedule(&self) -> Result<UserSchedule, EnvError> {
        UserSchedule::from_spans(self.users.clone())
    }

    /// Checks every invariant the runner relies on.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.repetitions == 0 {
            return Err(ScenarioError::NoRepetitions);
        }
        if self.policies.is_empty() {
            return Err(ScenarioError::NoPolicies);
        }
        if self.stride == 0 {
            return Err(ScenarioError::ZeroStride);
        }
        let arms = self.arm_set()?;
        let schedule = self.schedule()?;
        Environment::new(arms.clone(), schedule.clone(), 0)?;
        for policy in &self.policies {
            policy.validate(arms.len())?;
            if let PolicyConfig::Mega(params) = policy {
                check_gap(arms.means(), schedule.max_concurrent(), params.d)?;
            }
        }
        Ok(())
    }
}

/// The best `n + 1` arms (all arms if fewer) must be pairwise at least `d` apart.
pub fn check_gap(mu: &[f64], users: usize, d: f64) -> Result<(), ScenarioError> {
    let top = top_arms(mu, (users + 1).min(mu.len()));
    for (rank, pair) in top.windows(2).enumerate() {
        let gap = mu[pair[0]] - mu[pair[1]];
        if gap < d - 1e-12 {
            return Err(ScenarioError::GapBelowD { rank: rank + 1, next: rank + 2, gap, d });
        }
    }
    Ok(())
}

/// `k` means evenly spaced over `[0.1, 0.9]`, lowest first.
pub fn evenly_spaced_means(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.9],
        _ => (0..k).map(|i| 0.1 + 0.8 * i as f64 / (k - 1) as f64).collect(),
    }
}

pub const PRESET_NAMES: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

/// One-line description of each preset.
pub fn preset_summary(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2" => "N=K=2; MEGA vs all-users KL-UCB vs all-users eps-greedy; 50 reps",
        "fig3" => "N=6, K=9; MEGA vs rho-rand; 50 reps",
        "fig4" => "N=K=12; MEGA vs rho-rand; 50 reps",
        "fig5" => "K=12, users 1->2->3->4->3->2->1 in 7 equal intervals; MEGA vs rho-rand(N0=2); 20 reps",
        _ => return None,
    })
}

/// Reference scenarios. Every preset uses [`evenly_spaced_means`] for its arms.
pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let mega = PolicyConfig::Mega(MegaParams::default());
    let base = |name: &str, k: usize, users: Vec<UserSpan>, policies: Vec<PolicyConfig>, reps: u64| Scenario {
        name: name.to_string(),
        arms: evenly_spaced_means(k),
        horizon: DEFAULT_HORIZON,
        repetitions: reps,
        seed: DEFAULT_SEED,
        stride: DEFAULT_STRIDE,
        policies,
        users,
    };
    let fixed = |n: usize| UserSchedule::fixed(n).spans().to_vec();
    let defaults = MegaParams::default();
    Ok(match name {
        "fig2" => base(
            name,
            2,
            fixed(2),
            vec![mega, PolicyConfig::KlUcb, PolicyConfig::EpsilonGreedy { c: defaults.c, d: defaults.d }],
            50,
        ),
        "fig3" => base(name, 9, fixed(6), vec![mega, PolicyConfig::RhoRand { users: 6 }], 50),
        "fig4" => base(name, 12, fixed(12), vec![mega, PolicyConfig::RhoRand { users: 12 }], 50),
        "fig5" => {
            base(name, 12, staircase_schedule(4, DEFAULT_HORIZON), vec![mega, PolicyConfig::RhoRand { users: 2 }], 20)
        }
        _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
    })
}

/// Population rising from 1 to `peak` and back to 1 in `2·peak − 1` equal
/// intervals. User `i` joins at the `i`-th change and the most recent
/// arrival is the first to leave.
pub fn staircase_schedule(peak: usize, horizon: u64) -> Vec<UserSpan> {
    let intervals = (2 * peak - 1) as u64;
    let step = horizon / intervals;
    (0..peak)
        .map(|i| {
            let join = if i == 0 { 1 } else { i as u64 * step };
            let leave = (i > 0).then(|| (intervals - i as u64) * step);
            UserSpan { id: UserId(i), join, leave }
        })
        .collect()
}

/// Results of one policy across all repetitions.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: PolicyConfig,
    pub aggregate: TraceAggregate,
    pub traces: Vec<RegretTrace>,
}

/// Worker count from [`JOBS_ENV`], falling back to the available parallelism.
pub fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&j: &usize| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every policy of `scenario` for all repetitions on `jobs` workers.
///
/// Repetition `r` uses the seed derived from `(scenario.seed, r)` for every
/// policy, and traces are reduced in repetition order, so results do not
/// depend on `jobs`.
pub fn run_scenario(scenario: &Scenario, jobs: usize) -> Result<Vec<PolicyRun>, ScenarioError> {
    scenario.validate()?;
    let arms = scenario.arm_set()?;
    let schedule = scenario.schedule()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ScenarioError::Pool(e.to_string()))?;

    scenario
        .policies
        .iter()
        .map(|policy| {
            let traces = pool.install(|| {
                (0..scenario.repetitions)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = repetition_seed(scenario.seed, rep);
                        run_repetition(&arms, &schedule, policy, seed, scenario.horizon, scenario.stride)
                            .map_err(|source| ScenarioError::Repetition { rep, policy: policy.label(), source })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })?;
            Ok(PolicyRun { policy: policy.clone(), aggregate: aggregate(&traces)?, traces })
        })
        .collect()
}
