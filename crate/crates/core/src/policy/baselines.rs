//! Single-user index policies applied unchanged by every user.
//!
//! These know nothing about other users. Like every policy here they learn
//! from successful samples only; a collided pull leaves the statistics
//! untouched, so nothing steers two users off a shared favourite arm.

use super::{argmax_set, check_reward, positive, Policy, PolicyError};
use crate::env::Action;
use crate::rng::{self, StreamRng};

/// Per-arm pull counts and running means.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub pulls: Vec<u64>,
    pub means: Vec<f64>,
}

impl ArmStats {
    pub fn new(arms: usize) -> Self {
        Self { pulls: vec![0; arms], means: vec![0.0; arms] }
    }

    pub fn arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.pulls[arm] += 1;
        self.means[arm] += (reward - self.means[arm]) / self.pulls[arm] as f64;
    }

    fn check_arm(&self, arm: usize) -> Result<(), PolicyError> {
        if arm < self.arms() {
            Ok(())
        } else {
            Err(PolicyError::ArmOutOfRange { arm, arms: self.arms() })
        }
    }
}

/// UCB1 index `mean + √(2 ln t / n)`.
pub fn ucb1_index(mean: f64, pulls: u64, ln_t: f64) -> f64 {
    if pulls == 0 {
        return f64::INFINITY;
    }
    mean + (2.0 * ln_t / pulls as f64).sqrt()
}

/// Bernoulli Kullback-Leibler divergence `kl(p, q)`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Exploration budget `ln t + 3 ln ln t`, floored at zero for small `t`.
pub fn kl_ucb_exploration(t: u64) -> f64 {
    let ln_t = (t.max(1) as f64).ln();
    if ln_t <= 1.0 {
        // ln ln t is non-positive here
        return (ln_t + 3.0 * ln_t.ln()).max(0.0);
    }
    ln_t + 3.0 * ln_t.ln()
}

/// Largest `q ∈ [mean, 1]` with `kl(mean, q) ≤ budget`, by bisection to 1e-9.
pub fn kl_ucb_index(mean: f64, budget: f64) -> f64 {
    if budget.is_infinite() {
        return 1.0;
    }
    let (mut lo, mut hi) = (mean, 1.0);
    if bernoulli_kl(mean, hi) <= budget {
        return hi;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if bernoulli_kl(mean, mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Rounds `1..=K` pull the arms in order.
fn forced_pull(t: u64, arms: usize) -> Option<usize> {
    (t >= 1 && t <= arms as u64).then(|| (t - 1) as usize)
}

fn record_outcome(stats: &mut ArmStats, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
    check_reward(reward)?;
    if let Action::Transmit(arm) = action {
        stats.check_arm(arm)?;
        if !collided {
            stats.record(arm, reward);
        }
    }
    Ok(())
}

/// ε-greedy with the classical `min{1, cK/(d²t)}` schedule.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    c: f64,
    d: f64,
    stats: ArmStats,
    rng: StreamRng,
}

impl EpsilonGreedy {
    pub fn new(c: f64, d: f64, arms: usize, rng: StreamRng) -> Result<Self, PolicyError> {
        positive("c", c)?;
        positive("d", d)?;
        Ok(Self { c, d, stats: ArmStats::new(arms), rng })
    }

    pub fn epsilon(&self, t: u64) -> f64 {
        let k = self.stats.arms() as f64;
        (self.c * k / (self.d * self.d * t.max(1) as f64)).min(1.0)
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }
}

impl Policy for EpsilonGreedy {
    fn select(&mut self, t: u64) -> Action {
        let k = self.stats.arms();
        if let Some(arm) = forced_pull(t, k) {
            return Action::Transmit(arm);
        }
        let arm = if rng::bernoulli(self.epsilon(t), &mut self.rng) {
            self.rng_arm()
        } else {
            let best = argmax_set(&self.stats.means, 0..k);
            rng::choose_uniform(&best, &mut self.rng).expect("at least one arm")
        };
        Action::Transmit(arm)
    }

    fn update(&mut self, _t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
        record_outcome(&mut self.stats, action, reward, collided)
    }

    fn name(&self) -> &'static str {
        "eps-greedy"
    }
}

impl EpsilonGreedy {
    fn rng_arm(&mut self) -> usize {
        use rand::Rng;
        self.rng.random_range(0..self.stats.arms())
    }
}

#[derive(Debug, Clone)]
pub struct Ucb1 {
    stats: ArmStats,
    rng: StreamRng,
    scratch: Vec<f64>,
}

impl Ucb1 {
    pub fn new(arms: usize, rng: StreamRng) -> Self {
        Self { stats: ArmStats::new(arms), rng, scratch: vec![0.0; arms] }
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }
}

impl Policy for Ucb1 {
    fn select(&mut self, t: u64) -> Action {
        let k = self.stats.arms();
        if let Some(arm) = forced_pull(t, k) {
            return Action::Transmit(arm);
        }
        let ln_t = (t as f64).ln();
        for (idx, (m, n)) in self.scratch.iter_mut().zip(self.stats.means.iter().zip(&self.stats.pulls)) {
            *idx = ucb1_index(*m, *n, ln_t);
        }
        let best = argmax_set(&self.scratch, 0..k);
        Action::Transmit(rng::choose_uniform(&best, &mut self.rng).expect("at least one arm"))
    }

    fn update(&mut self, _t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
        record_outcome(&mut self.stats, action, reward, collided)
    }

    fn name(&self) -> &'static str {
        "ucb1"
    }
}

#[derive(Debug, Clone)]
pub struct KlUcb {
    stats: ArmStats,
    rng: StreamRng,
    scratch: Vec<f64>,
}

impl KlUcb {
    pub fn new(arms: usize, rng: StreamRng) -> Self {
        Self { stats: ArmStats::new(arms), rng, scratch: vec![0.0; arms] }
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }
}

impl Policy for KlUcb {
    fn select(&mut self, t: u64) -> Action {
        let k = self.stats.arms();
        if let Some(arm) = forced_pull(t, k) {
            return Action::Transmit(arm);
        }
        let budget = kl_ucb_exploration(t);
        for (idx, (m, n)) in self.scratch.iter_mut().zip(self.stats.means.iter().zip(&self.stats.pulls)) {
            *idx = if *n == 0 { f64::INFINITY } else { kl_ucb_index(*m, budget / *n as f64) };
        }
        let best = argmax_set(&self.scratch, 0..k);
        Action::Transmit(rng::choose_uniform(&best, &mut self.rng).expect("at least one arm"))
    }

    fn update(&mut self, _t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
        record_outcome(&mut self.stats, action, reward, collided)
    }

    fn name(&self) -> &'static str {
        "kl-ucb"
    }
}
