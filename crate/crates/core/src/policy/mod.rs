//! Per-user decision rules.
//!
//! Every policy sees only its own history: the round index on its own clock,
//! the action it took, the reward it got and its collision indicator. No
//! instance ever reads another user's state.

mod baselines;
mod mega;
mod ranking;
mod rho_rand;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::env::Action as PolicyAction;
use crate::env::Action;
use crate::rng::StreamRng;

pub use baselines::{bernoulli_kl, kl_ucb_exploration, kl_ucb_index, ucb1_index, ArmStats, EpsilonGreedy, KlUcb, Ucb1};
pub use mega::{backoff_window, epsilon_t, exploration_scale, persistence_after, Mega, MegaParams, MegaState};
pub use ranking::is_epsilon_correct_ranking;
pub use rho_rand::RhoRand;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("at least two arms are required, got {0}")]
    TooFewArms(usize),
    #[error("{users} users exceed {arms} arms")]
    TooManyUsers { users: usize, arms: usize },
    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
}

/// A single user's decision rule.
pub trait Policy: Send {
    /// Chooses the action for round `t` (the user's own clock, starting at 1).
    fn select(&mut self, t: u64) -> Action;

    /// Feeds back the outcome of the action chosen for round `t`.
    fn update(&mut self, t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError>;

    fn name(&self) -> &'static str;
}

/// Policy choice plus parameters, as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyConfig {
    Mega(MegaParams),
    #[serde(rename = "eps-greedy")]
    EpsilonGreedy {
        c: f64,
        d: f64,
    },
    Ucb1,
    KlUcb,
    /// Rank-based UCB1; needs the number of users up front.
    RhoRand {
        users: usize,
    },
}

impl PolicyConfig {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyConfig::Mega(_) => "mega",
            PolicyConfig::EpsilonGreedy { .. } => "eps-greedy",
            PolicyConfig::Ucb1 => "ucb1",
            PolicyConfig::KlUcb => "kl-ucb",
            PolicyConfig::RhoRand { .. } => "rho-rand",
        }
    }

    pub fn validate(&self, arms: usize) -> Result<(), PolicyError> {
        match self {
            PolicyConfig::Mega(params) => {
                params.validate()?;
                if arms < 2 {
                    return Err(PolicyError::TooFewArms(arms));
                }
            }
            PolicyConfig::EpsilonGreedy { c, d } => {
                positive("c", *c)?;
                positive("d", *d)?;
            }
            PolicyConfig::Ucb1 | PolicyConfig::KlUcb => {}
            PolicyConfig::RhoRand { users } => {
                if *users == 0 || *users > arms {
                    return Err(PolicyError::TooManyUsers { users: *users, arms });
                }
            }
        }
        Ok(())
    }

    /// Instantiates the policy for a `arms`-armed bandit.
    pub fn build(&self, arms: usize, rng: StreamRng) -> Result<Box<dyn Policy>, PolicyError> {
        self.validate(arms)?;
        Ok(match self {
            PolicyConfig::Mega(params) => Box::new(Mega::new(*params, arms, rng)?),
            PolicyConfig::EpsilonGreedy { c, d } => Box::new(EpsilonGreedy::new(*c, *d, arms, rng)?),
            PolicyConfig::Ucb1 => Box::new(Ucb1::new(arms, rng)),
            PolicyConfig::KlUcb => Box::new(KlUcb::new(arms, rng)),
            PolicyConfig::RhoRand { users } => Box::new(RhoRand::new(arms, *users, rng)?),
        })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<(), PolicyError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(PolicyError::InvalidParameter { name, value, reason: "must be positive" })
    }
}

pub(crate) fn check_reward(reward: f64) -> Result<(), PolicyError> {
    if (0.0..=1.0).contains(&reward) {
        Ok(())
    } else {
        Err(PolicyError::RewardOutOfRange(reward))
    }
}

/// Indices of the maximal entries among `candidates`.
pub(crate) fn argmax_set(values: &[f64], candidates: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for k in candidates {
        let v = values[k];
        if v > best {
            best = v;
            out.clear();
            out.push(k);
        } else if v == best {
            out.push(k);
        }
    }
    out
}
