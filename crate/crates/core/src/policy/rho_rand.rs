//! ρ^RAND: each user plays the arm holding its current rank ρ in its own
//! UCB1 ordering and redraws ρ uniformly from `{1..N}` after a collision.
//! Statistics come from collision-free samples only.

use rand::Rng;

use super::baselines::{ucb1_index, ArmStats};
use super::{check_reward, Policy, PolicyError};
use crate::env::Action;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone)]
pub struct RhoRand {
    users: usize,
    rank: usize,
    stats: ArmStats,
    rng: StreamRng,
    scratch: Vec<f64>,
}

impl RhoRand {
    pub fn new(arms: usize, users: usize, mut rng: StreamRng) -> Result<Self, PolicyError> {
        if users == 0 || users > arms {
            return Err(PolicyError::TooManyUsers { users, arms });
        }
        let rank = draw_rank(users, &mut rng);
        Ok(Self { users, rank, stats: ArmStats::new(arms), rng, scratch: vec![0.0; arms] })
    }

    /// Current rank, in `1..=N`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    /// Arm holding position `rank` (1-based) in decreasing order of `indices`;
    /// ties are ordered uniformly at random.
    pub fn arm_at_rank(indices: &[f64], rank: usize, rng: &mut StreamRng) -> usize {
        let mut sorted = indices.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let target = sorted[rank - 1];
        let tied: Vec<usize> = (0..indices.len()).filter(|&k| indices[k] == target).collect();
        rng::choose_uniform(&tied, rng).expect("target value is present")
    }
}

fn draw_rank(users: usize, rng: &mut StreamRng) -> usize {
    if users == 1 {
        1
    } else {
        rng.random_range(1..=users)
    }
}

impl Policy for RhoRand {
    fn select(&mut self, t: u64) -> Action {
        let k = self.stats.arms();
        if t >= 1 && t <= k as u64 {
            return Action::Transmit((t - 1) as usize);
        }
        let ln_t = (t as f64).ln();
        for (idx, (m, n)) in self.scratch.iter_mut().zip(self.stats.means.iter().zip(&self.stats.pulls)) {
            *idx = ucb1_index(*m, *n, ln_t);
        }
        Action::Transmit(Self::arm_at_rank(&self.scratch, self.rank, &mut self.rng))
    }

    fn update(&mut self, _t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
        check_reward(reward)?;
        let Action::Transmit(arm) = action else {
            return Ok(());
        };
        if arm >= self.stats.arms() {
            return Err(PolicyError::ArmOutOfRange { arm, arms: self.stats.arms() });
        }
        if collided {
            self.rank = draw_rank(self.users, &mut self.rng);
        } else {
            self.stats.record(arm, reward);
        }
        Ok(())
    }

    fn name(&self) -> &'static str {
        "rho-rand"
    }
}
