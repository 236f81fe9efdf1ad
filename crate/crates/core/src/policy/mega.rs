//! Multi-user ε-greedy with collision avoidance (MEGA).
//!
//! Each user runs an ε-greedy learner over its own empirical means, computed
//! from collision-free samples only. On top of that sits an ALOHA-like
//! persistence mechanism:
//!
//! * after a collision the user re-transmits on the same arm with its current
//!   persistence probability `p`, which stays frozen while the collision
//!   streak lasts;
//! * otherwise it gives up, marks the arm unavailable until a deadline drawn
//!   uniformly from `[t, t + ⌊t^β⌋]`, resets `p` to `p0` and chooses again in
//!   the same round among the arms still available;
//! * every collision-free sample moves `p` towards one via `p ← pα + (1 − α)`,
//!   and switching to a different arm resets it to `p0`.
//!
//! Exploration probability is `ε_t = min{1, cK²/(d²(K−1)t)}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_set, check_reward, positive, Policy, PolicyError};
use crate::env::Action;
use crate::rng::{self, StreamRng};

/// Tuning constants of MEGA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MegaParams {
    pub c: f64,
    pub d: f64,
    pub p0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for MegaParams {
    /// The cross-validated setting used for the reference experiments.
    fn default() -> Self {
        Self { c: 0.1, d: 0.05, p0: 0.6, alpha: 0.5, beta: 0.8 }
    }
}

impl MegaParams {
    pub fn new(c: f64, d: f64, p0: f64, alpha: f64, beta: f64) -> Result<Self, PolicyError> {
        let params = Self { c, d, p0, alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        positive("c", self.c)?;
        positive("d", self.d)?;
        for (name, value) in [("p0", self.p0), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(PolicyError::InvalidParameter { name, value, reason: "must lie strictly inside (0, 1)" });
            }
        }
        Ok(())
    }
}

/// `cK²/(d²(K−1))`: the round up to which exploration is certain.
pub fn exploration_scale(c: f64, d: f64, arms: usize) -> f64 {
    let k = arms as f64;
    c * k * k / (d * d * (k - 1.0))
}

/// Exploration probability at round `t`.
pub fn epsilon_t(params: &MegaParams, arms: usize, t: u64) -> Result<f64, PolicyError> {
    if arms < 2 {
        return Err(PolicyError::TooFewArms(arms));
    }
    let t = t.max(1) as f64;
    Ok((exploration_scale(params.c, params.d, arms) / t).min(1.0))
}

/// Persistence after `m` consecutive successes starting from `p0`:
/// `1 − α^m (1 − p0)`.
pub fn persistence_after(m: u64, p0: f64, alpha: f64) -> f64 {
    let decay = if m <= i32::MAX as u64 { alpha.powi(m as i32) } else { 0.0 };
    1.0 - decay * (1.0 - p0)
}

/// Width `⌊t^β⌋` of the back-off range drawn at round `t`.
pub fn backoff_window(t: u64, beta: f64) -> u64 {
    (t as f64).powf(beta).floor() as u64
}

/// Everything a MEGA user remembers.
#[derive(Debug, Clone, PartialEq)]
pub struct MegaState {
    /// Current persistence probability.
    pub p: f64,
    /// Consecutive collision-free samples on the held arm.
    pub streak: u64,
    pub last_arm: Option<usize>,
    pub last_collision: bool,
    /// Round from which each arm is available again.
    pub t_next: Vec<u64>,
    pub mu_hat: Vec<f64>,
    pub succ_count: Vec<u64>,
}

impl MegaState {
    pub fn new(arms: usize, p0: f64) -> Self {
        Self {
            p: p0,
            streak: 0,
            last_arm: None,
            last_collision: false,
            t_next: vec![1; arms],
            mu_hat: vec![0.0; arms],
            succ_count: vec![0; arms],
        }
    }

    pub fn available(&self, t: u64) -> impl Iterator<Item = usize> + '_ {
        self.t_next.iter().enumerate().filter(move |(_, &tn)| tn <= t).map(|(k, _)| k)
    }
}

#[derive(Debug, Clone)]
pub struct Mega {
    params: MegaParams,
    state: MegaState,
    rng: StreamRng,
}

impl Mega {
    pub fn new(params: MegaParams, arms: usize, rng: StreamRng) -> Result<Self, PolicyError> {
        params.validate()?;
        if arms < 2 {
            return Err(PolicyError::TooFewArms(arms));
        }
        Ok(Self { state: MegaState::new(arms, params.p0), params, rng })
    }

    /// Resumes from an explicit state, e.g. in tests.
    pub fn with_state(params: MegaParams, state: MegaState, rng: StreamRng) -> Result<Self, PolicyError> {
        let mut policy = Self::new(params, state.t_next.len(), rng)?;
        policy.state = state;
        Ok(policy)
    }

    pub fn params(&self) -> &MegaParams {
        &self.params
    }

    pub fn state(&self) -> &MegaState {
        &self.state
    }

    fn arms(&self) -> usize {
        self.state.t_next.len()
    }

    fn give_up(&mut self, arm: usize, t: u64) {
        let window = backoff_window(t, self.params.beta);
        self.state.t_next[arm] = t + self.rng.random_range(0..=window);
        self.state.p = self.params.p0;
        self.state.streak = 0;
    }
}

impl Policy for Mega {
    fn select(&mut self, t: u64) -> Action {
        if self.state.last_collision {
            if let Some(arm) = self.state.last_arm {
                if rng::bernoulli(self.state.p, &mut self.rng) {
                    return Action::Transmit(arm);
                }
                self.give_up(arm, t);
            }
        }

        let available: Vec<usize> = self.state.available(t).collect();
        if available.is_empty() {
            return Action::Refrain;
        }
        // arms >= 2 is enforced at construction
        let eps = epsilon_t(&self.params, self.arms(), t).unwrap_or(1.0);
        let arm = if rng::bernoulli(eps, &mut self.rng) {
            rng::choose_uniform(&available, &mut self.rng)
        } else {
            let best = argmax_set(&self.state.mu_hat, available.iter().copied());
            rng::choose_uniform(&best, &mut self.rng)
        }
        .expect("available set is non-empty");

        if self.state.last_arm != Some(arm) {
            self.state.p = self.params.p0;
            self.state.streak = 0;
        }
        Action::Transmit(arm)
    }

    fn update(&mut self, _t: u64, action: Action, reward: f64, collided: bool) -> Result<(), PolicyError> {
        check_reward(reward)?;
        let arm = match action {
            Action::Refrain => {
                self.state.last_collision = false;
                return Ok(());
            }
            Action::Transmit(arm) if arm >= self.arms() => {
                return Err(PolicyError::ArmOutOfRange { arm, arms: self.arms() });
            }
            Action::Transmit(arm) => arm,
        };
        let s = &mut self.state;
        s.last_arm = Some(arm);
        s.last_collision = collided;
        if !collided {
            s.succ_count[arm] += 1;
            s.mu_hat[arm] += (reward - s.mu_hat[arm]) / s.succ_count[arm] as f64;
            s.streak += 1;
            s.p = s.p * self.params.alpha + (1.0 - self.params.alpha);
        }
        Ok(())
    }

    fn name(&self) -> &'static str {
        "mega"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn params() -> MegaParams {
        MegaParams::default()
    }

    #[test]
    fn epsilon_schedule_values() {
        let p = params();
        assert!((exploration_scale(p.c, p.d, 9) - 405.0).abs() < 1e-9);
        assert!((epsilon_t(&p, 9, 405).unwrap() - 1.0).abs() < 1e-12);
        assert!((epsilon_t(&p, 9, 810).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(epsilon_t(&p, 9, 1).unwrap(), 1.0);
        assert_eq!(epsilon_t(&p, 1, 10), Err(PolicyError::TooFewArms(1)));
    }

    #[test]
    fn epsilon_is_non_increasing() {
        let p = params();
        let mut prev = 1.0;
        for t in 1..20_000 {
            let e = epsilon_t(&p, 9, t).unwrap();
            assert!(e <= prev && e > 0.0);
            prev = e;
        }
    }

    #[test]
    fn persistence_examples() {
        assert!((persistence_after(0, 0.6, 0.5) - 0.6).abs() < 1e-15);
        assert!((persistence_after(1, 0.6, 0.5) - 0.8).abs() < 1e-15);
        assert!((persistence_after(2, 0.6, 0.5) - 0.9).abs() < 1e-15);
        assert_eq!(persistence_after(u64::MAX, 0.6, 0.5), 1.0);
    }

    #[test]
    fn backoff_window_floor() {
        assert_eq!(backoff_window(100, 0.8), 39);
        assert_eq!(backoff_window(1, 0.8), 1);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MegaParams::new(0.1, 0.05, 1.0, 0.5, 0.8).is_err());
        assert!(MegaParams::new(0.1, 0.05, 0.6, 0.0, 0.8).is_err());
        assert!(MegaParams::new(0.1, 0.05, 0.6, 0.5, 1.2).is_err());
        assert!(MegaParams::new(-0.1, 0.05, 0.6, 0.5, 0.8).is_err());
        assert!(MegaParams::new(0.1, 0.0, 0.6, 0.5, 0.8).is_err());
        assert!(Mega::new(params(), 1, stream(0, 0)).is_err());
    }

    #[test]
    fn certain_persistence_keeps_the_arm() {
        let mut state = MegaState::new(4, 0.6);
        state.p = 1.0;
        state.last_arm = Some(2);
        state.last_collision = true;
        // every arm unavailable: persisting must not consult availability
        state.t_next = vec![10_000; 4];
        let mut mega = Mega::with_state(params(), state, stream(5, 1)).unwrap();
        for t in 100..200 {
            assert_eq!(mega.select(t), Action::Transmit(2));
            mega.update(t, Action::Transmit(2), 0.0, true).unwrap();
        }
    }

    #[test]
    fn give_up_deadline_range() {
        let mut state = MegaState::new(4, 0.6);
        state.p = 0.0;
        state.last_arm = Some(1);
        state.last_collision = true;
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..2000 {
            let mut mega = Mega::with_state(params(), state.clone(), stream(seed, 1)).unwrap();
            let action = mega.select(100);
            let tn = mega.state().t_next[1];
            if tn > 100 {
                assert_ne!(action, Action::Transmit(1));
            }
            assert!((100..=139).contains(&tn), "deadline {tn}");
            assert_eq!(mega.state().p, 0.6);
            seen.insert(tn);
        }
        assert_eq!(seen.len(), 40);
    }

    #[test]
    fn all_arms_unavailable_refrains() {
        let mut state = MegaState::new(3, 0.6);
        state.t_next = vec![50, 60, 70];
        let mut mega = Mega::with_state(params(), state, stream(1, 1)).unwrap();
        assert_eq!(mega.select(49), Action::Refrain);
        let before = mega.state().clone();
        mega.update(49, Action::Refrain, 0.0, false).unwrap();
        assert_eq!(mega.state(), &before);
        assert_eq!(mega.select(50), Action::Transmit(0));
    }

    #[test]
    fn collision_freezes_means_and_persistence() {
        let mut mega = Mega::new(params(), 3, stream(1, 1)).unwrap();
        mega.update(1, Action::Transmit(0), 1.0, false).unwrap();
        let p = mega.state().p;
        let mu = mega.state().mu_hat.clone();
        mega.update(2, Action::Transmit(0), 0.0, true).unwrap();
        assert_eq!(mega.state().p, p);
        assert_eq!(mega.state().mu_hat, mu);
        assert!(mega.state().last_collision);
    }

    #[test]
    fn running_mean_over_successes() {
        let mut mega = Mega::new(params(), 3, stream(1, 1)).unwrap();
        mega.update(1, Action::Transmit(2), 0.0, false).unwrap();
        mega.update(2, Action::Transmit(2), 0.0, true).unwrap();
        mega.update(3, Action::Transmit(2), 1.0, false).unwrap();
        assert_eq!(mega.state().mu_hat[2], 0.5);
        assert_eq!(mega.state().succ_count[2], 2);
    }

    #[test]
    fn switching_arms_resets_persistence() {
        // exploit deterministically: arm 1 is the only arm with a positive estimate
        let mut state = MegaState::new(2, 0.6);
        state.last_arm = Some(0);
        state.streak = 5;
        state.p = persistence_after(5, 0.6, 0.5);
        state.mu_hat = vec![0.0, 0.7];
        state.succ_count = vec![5, 3];
        let mut mega = Mega::with_state(params(), state, stream(1, 1)).unwrap();
        // ε_t is tiny at this round so the exploit branch is taken
        let t = 10_000_000;
        let action = mega.select(t);
        assert_eq!(action, Action::Transmit(1));
        assert_eq!(mega.state().p, 0.6);
        mega.update(t, action, 1.0, false).unwrap();
        assert!((mega.state().p - 0.8).abs() < 1e-15);
        assert_eq!(mega.state().streak, 1);
    }

    #[test]
    fn rejects_reward_out_of_range() {
        let mut mega = Mega::new(params(), 2, stream(1, 1)).unwrap();
        assert_eq!(mega.update(1, Action::Transmit(0), 1.5, false), Err(PolicyError::RewardOutOfRange(1.5)));
    }

    #[test]
    fn identical_state_and_stream_give_identical_actions() {
        let mut a = Mega::new(params(), 5, stream(9, 3)).unwrap();
        let mut b = Mega::new(params(), 5, stream(9, 3)).unwrap();
        for t in 1..2000 {
            let (x, y) = (a.select(t), b.select(t));
            assert_eq!(x, y);
            let collided = t % 7 == 0;
            let reward = if collided { 0.0 } else { (t % 2) as f64 };
            a.update(t, x, reward, collided).unwrap();
            b.update(t, y, reward, collided).unwrap();
        }
    }

    proptest! {
        #[test]
        fn persistence_matches_closed_form(events in proptest::collection::vec(0u8..4, 1..300), seed in 0u64..1000) {
            let p = params();
            let mut mega = Mega::new(p, 4, stream(seed, 1)).unwrap();
            for (i, ev) in events.iter().enumerate() {
                let t = i as u64 + 1;
                let action = mega.select(t);
                let (reward, collided) = match ev {
                    0 => (0.0, true),
                    1 => (0.0, false),
                    _ => (1.0, false),
                };
                let collided = collided && action != Action::Refrain;
                mega.update(t, action, reward, collided).unwrap();
                let s = mega.state();
                if !s.last_collision {
                    let closed = persistence_after(s.streak, p.p0, p.alpha);
                    prop_assert!((s.p - closed).abs() < 1e-12);
                }
                prop_assert!(s.mu_hat.iter().all(|m| (0.0..=1.0).contains(m)));
                prop_assert!(s.t_next.iter().all(|&tn| tn >= 1));
            }
        }

        #[test]
        fn exploit_choice_is_scale_invariant(means in proptest::collection::vec(0.0f64..1.0, 2..8), scale in 0.01f64..1.0, seed in 0u64..1000) {
            let k = means.len();
            let mut state = MegaState::new(k, 0.6);
            state.mu_hat = means.iter().map(|m| (m * 10.0).round() / 10.0).collect();
            let mut scaled = state.clone();
            scaled.mu_hat.iter_mut().for_each(|m| *m *= scale);
            let mut a = Mega::with_state(params(), state, stream(seed, 1)).unwrap();
            let mut b = Mega::with_state(params(), scaled, stream(seed, 1)).unwrap();
            let t = 1_000_000_000;
            prop_assert_eq!(a.select(t), b.select(t));
        }
    }
}
