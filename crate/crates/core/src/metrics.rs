//! Regret, collision counting and cross-repetition aggregation.
//!
//! Regret is measured against the best orthogonal configuration for the
//! current population: with `N(t)` active users the benchmark is the sum of
//! the `N(t)` largest means. Pseudo-regret credits a user with the true mean
//! of its arm whenever it transmits without collision; realized regret uses
//! the rewards actually drawn.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::env::RoundOutcome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{users} users exceed {arms} arms")]
    TooManyUsers { users: usize, arms: usize },
    #[error("cannot aggregate an empty list of traces")]
    NoTraces,
    #[error("trace {index} does not share the checkpoints of trace 0")]
    MismatchedTraces { index: usize },
}

/// Arm indices of the `n` largest means, best first; ties go to the lower index.
pub fn top_arms(mu: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// The optimal arm set K* for `n` users.
pub fn optimal_set(mu: &[f64], n: usize) -> Result<BTreeSet<usize>, MetricsError> {
    if n > mu.len() {
        return Err(MetricsError::TooManyUsers { users: n, arms: mu.len() });
    }
    Ok(top_arms(mu, n).into_iter().collect())
}

/// Pseudo-regret of one round: `Σ_{k∈K*} μ_k − Σ_n μ_{a_n}·1{transmitted, no collision}`.
pub fn instantaneous_pseudo_regret(mu: &[f64], outcome: &RoundOutcome) -> Result<f64, MetricsError> {
    RegretAccountant::new(mu).pseudo(outcome)
}

/// Realized regret of one round: `Σ_{k∈K*} μ_k − Σ_n r_n`. May be negative.
pub fn realized_regret_increment(mu: &[f64], outcome: &RoundOutcome) -> Result<f64, MetricsError> {
    RegretAccountant::new(mu).realized(outcome)
}

/// Per-round regret evaluation with the optimal sets precomputed for every
/// population size.
#[derive(Debug, Clone)]
pub struct RegretAccountant {
    mu: Vec<f64>,
    /// `optimal_value[n]` is the summed mean of the `n` best arms.
    optimal_value: Vec<f64>,
    /// Arms in best-first order.
    order: Vec<usize>,
    /// `rank[k]` is the position of arm `k` in `order`.
    rank: Vec<usize>,
}

impl RegretAccountant {
    pub fn new(mu: &[f64]) -> Self {
        let order = top_arms(mu, mu.len());
        let mut rank = vec![0; mu.len()];
        let mut optimal_value = vec![0.0; mu.len() + 1];
        for (pos, &k) in order.iter().enumerate() {
            rank[k] = pos;
            optimal_value[pos + 1] = optimal_value[pos] + mu[k];
        }
        Self { mu: mu.to_vec(), optimal_value, order, rank }
    }

    pub fn optimal_value(&self, users: usize) -> Result<f64, MetricsError> {
        self.optimal_value.get(users).copied().ok_or(MetricsError::TooManyUsers { users, arms: self.mu.len() })
    }

    /// Computed as the mass of optimal arms left uncovered minus the mass of
    /// sub-optimal arms in use, so an optimal configuration scores exactly 0.
    pub fn pseudo(&self, outcome: &RoundOutcome) -> Result<f64, MetricsError> {
        let n = outcome.users.len();
        self.optimal_value(n)?;
        let mut covered = vec![false; n];
        let mut extra = 0.0;
        for arm in outcome.clean_arms() {
            if self.rank[arm] < n {
                covered[self.rank[arm]] = true;
            } else {
                extra += self.mu[arm];
            }
        }
        let missing: f64 = self.order[..n].iter().zip(&covered).filter(|(_, c)| !**c).map(|(&k, _)| self.mu[k]).sum();
        Ok((missing - extra).max(0.0))
    }

    pub fn realized(&self, outcome: &RoundOutcome) -> Result<f64, MetricsError> {
        let best = self.optimal_value(outcome.users.len())?;
        Ok(best - outcome.users.iter().map(|u| u.reward).sum::<f64>())
    }
}

/// Cumulative series of one repetition, sampled at `times`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub times: Vec<u64>,
    pub pseudo_regret: Vec<f64>,
    pub realized_regret: Vec<f64>,
    /// `collisions[user][i]`: collisions suffered by `user` up to `times[i]`.
    pub collisions: Vec<Vec<u64>>,
    /// Rounds so far with no collision and zero pseudo-regret.
    pub optimal_rounds: Vec<u64>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Collision count averaged over users at each checkpoint.
    pub fn collisions_per_user(&self) -> Vec<f64> {
        let users = self.collisions.len().max(1) as f64;
        (0..self.len()).map(|i| self.collisions.iter().map(|c| c[i] as f64).sum::<f64>() / users).collect()
    }

    /// Index of checkpoint `t`, if recorded.
    pub fn index_of(&self, t: u64) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }
}

/// Accumulates per-round results into a [`RegretTrace`], recording every
/// `stride` rounds.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    accountant: RegretAccountant,
    stride: u64,
    pseudo: f64,
    realized: f64,
    collisions: Vec<u64>,
    optimal_rounds: u64,
    trace: RegretTrace,
}

impl TraceRecorder {
    /// `users` is the number of distinct users in the schedule; outcomes refer
    /// to them by id.
    pub fn new(mu: &[f64], users: usize, stride: u64) -> Self {
        Self {
            accountant: RegretAccountant::new(mu),
            stride: stride.max(1),
            pseudo: 0.0,
            realized: 0.0,
            collisions: vec![0; users],
            optimal_rounds: 0,
            trace: RegretTrace { collisions: vec![Vec::new(); users], ..Default::default() },
        }
    }

    /// Folds in one round; returns its pseudo-regret increment.
    pub fn record(&mut self, outcome: &RoundOutcome) -> Result<f64, MetricsError> {
        let inc = self.accountant.pseudo(outcome)?;
        self.pseudo += inc;
        self.realized += self.accountant.realized(outcome)?;
        let mut any_collision = false;
        for u in &outcome.users {
            if u.collided {
                self.collisions[u.user.0] += 1;
                any_collision = true;
            }
        }
        if !any_collision && inc == 0.0 {
            self.optimal_rounds += 1;
        }
        if outcome.t.is_multiple_of(self.stride) {
            self.checkpoint(outcome.t);
        }
        Ok(inc)
    }

    fn checkpoint(&mut self, t: u64) {
        let tr = &mut self.trace;
        tr.times.push(t);
        tr.pseudo_regret.push(self.pseudo);
        tr.realized_regret.push(self.realized);
        tr.optimal_rounds.push(self.optimal_rounds);
        for (series, &c) in tr.collisions.iter_mut().zip(&self.collisions) {
            series.push(c);
        }
    }

    pub fn finish(self) -> RegretTrace {
        self.trace
    }
}

/// Pointwise mean and standard deviation of one series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl SeriesStats {
    /// Population (divide-by-n) moments across `rows`, which must be non-empty
    /// and of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let len = rows.first().map_or(0, Vec::len);
        let mut out = SeriesStats { mean: Vec::with_capacity(len), std: Vec::with_capacity(len) };
        for i in 0..len {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / n;
            out.mean.push(mean);
            out.std.push(var.sqrt());
        }
        out
    }
}

/// Cross-repetition summary of a set of traces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceAggregate {
    pub times: Vec<u64>,
    pub pseudo_regret: SeriesStats,
    pub realized_regret: SeriesStats,
    pub collisions_per_user: SeriesStats,
    pub repetitions: usize,
}

impl TraceAggregate {
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Reduces traces in the given order. Collisions are first averaged across
/// users within each repetition.
pub fn aggregate(traces: &[RegretTrace]) -> Result<TraceAggregate, MetricsError> {
    let first = traces.first().ok_or(MetricsError::NoTraces)?;
    if let Some(index) = traces.iter().position(|t| t.times != first.times) {
        return Err(MetricsError::MismatchedTraces { index });
    }
    let pseudo: Vec<Vec<f64>> = traces.iter().map(|t| t.pseudo_regret.clone()).collect();
    let realized: Vec<Vec<f64>> = traces.iter().map(|t| t.realized_regret.clone()).collect();
    let collisions: Vec<Vec<f64>> = traces.iter().map(RegretTrace::collisions_per_user).collect();
    Ok(TraceAggregate {
        times: first.times.clone(),
        pseudo_regret: SeriesStats::from_rows(&pseudo),
        realized_regret: SeriesStats::from_rows(&realized),
        collisions_per_user: SeriesStats::from_rows(&collisions),
        repetitions: traces.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, UserId, UserOutcome};
    use proptest::prelude::*;

    fn outcome(entries: &[(Option<usize>, f64, bool)]) -> RoundOutcome {
        RoundOutcome {
            t: 1,
            users: entries
                .iter()
                .enumerate()
                .map(|(i, &(arm, reward, collided))| UserOutcome {
                    user: UserId(i),
                    action: arm.map_or(Action::Refrain, Action::Transmit),
                    reward,
                    collided,
                })
                .collect(),
        }
    }

    #[test]
    fn optimal_set_examples() {
        assert_eq!(optimal_set(&[0.9, 0.5], 1).unwrap(), BTreeSet::from([0]));
        assert_eq!(optimal_set(&[0.9, 0.5], 2).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(optimal_set(&[0.3, 0.7, 0.7, 0.1], 2).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(optimal_set(&[0.5, 0.5, 0.5], 1).unwrap(), BTreeSet::from([0]));
        assert!(optimal_set(&[0.5], 2).is_err());
    }

    #[test]
    fn pseudo_regret_examples() {
        let mu = [0.9, 0.5];
        let orth = outcome(&[(Some(0), 1.0, false), (Some(1), 0.0, false)]);
        assert_eq!(instantaneous_pseudo_regret(&mu, &orth).unwrap(), 0.0);
        let both = outcome(&[(Some(0), 0.0, true), (Some(0), 0.0, true)]);
        assert!((instantaneous_pseudo_regret(&mu, &both).unwrap() - 1.4).abs() < 1e-12);
        let single = outcome(&[(Some(1), 1.0, false)]);
        assert!((instantaneous_pseudo_regret(&mu, &single).unwrap() - 0.4).abs() < 1e-12);
        let refrain = outcome(&[(None, 0.0, false)]);
        assert!((instantaneous_pseudo_regret(&mu, &refrain).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn realized_regret_examples() {
        let mu = [0.9, 0.5];
        let lucky = outcome(&[(Some(0), 1.0, false), (Some(1), 1.0, false)]);
        assert!((realized_regret_increment(&mu, &lucky).unwrap() + 0.6).abs() < 1e-12);
        let both = outcome(&[(Some(0), 0.0, true), (Some(0), 0.0, true)]);
        assert_eq!(realized_regret_increment(&mu, &both).unwrap(), instantaneous_pseudo_regret(&mu, &both).unwrap());
    }

    fn trace(values: &[f64]) -> RegretTrace {
        RegretTrace {
            times: (1..=values.len() as u64).collect(),
            pseudo_regret: values.to_vec(),
            realized_regret: values.to_vec(),
            collisions: vec![vec![0; values.len()]],
            optimal_rounds: vec![0; values.len()],
        }
    }

    #[test]
    fn aggregate_examples() {
        let single = aggregate(&[trace(&[1.0, 3.0, 7.0])]).unwrap();
        assert!(single.pseudo_regret.std.iter().all(|&s| s == 0.0));
        assert_eq!(single.repetitions, 1);

        let pair = aggregate(&[trace(&[0.0; 4]), trace(&[2.0; 4])]).unwrap();
        assert!(pair.pseudo_regret.mean.iter().all(|&m| m == 1.0));
        assert!(pair.pseudo_regret.std.iter().all(|&s| s == 1.0));

        assert_eq!(aggregate(&[]), Err(MetricsError::NoTraces));
        assert_eq!(aggregate(&[trace(&[1.0]), trace(&[1.0, 2.0])]), Err(MetricsError::MismatchedTraces { index: 1 }));
    }

    #[test]
    fn collisions_are_averaged_over_users_first() {
        let mut t = trace(&[0.0, 0.0]);
        t.collisions = vec![vec![2, 4], vec![0, 0]];
        let agg = aggregate(&[t]).unwrap();
        assert_eq!(agg.collisions_per_user.mean, vec![1.0, 2.0]);
    }

    #[test]
    fn recorder_strides() {
        let mu = [0.9, 0.5];
        let mut rec = TraceRecorder::new(&mu, 2, 10);
        for t in 1..=35 {
            let mut o = outcome(&[(Some(0), 0.0, true), (Some(0), 0.0, true)]);
            o.t = t;
            rec.record(&o).unwrap();
        }
        let tr = rec.finish();
        assert_eq!(tr.times, vec![10, 20, 30]);
        assert_eq!(tr.collisions[1], vec![10, 20, 30]);
        assert!((tr.pseudo_regret[2] - 42.0).abs() < 1e-9);
        assert_eq!(tr.optimal_rounds, vec![0, 0, 0]);
    }

    proptest! {
        #[test]
        fn zero_regret_iff_clean_arms_are_optimal(
            raw_mu in proptest::collection::btree_set(1u32..100, 2..7),
            picks in proptest::collection::vec(proptest::option::of(0usize..6), 1..6),
        ) {
            let mu: Vec<f64> = raw_mu.iter().map(|&m| m as f64 / 100.0).collect();
            let k = mu.len();
            let picks: Vec<Option<usize>> = picks.into_iter().take(k).map(|p| p.map(|a| a % k)).collect();
            let n = picks.len();
            let mut count = vec![0; k];
            for a in picks.iter().flatten() { count[*a] += 1; }
            let entries: Vec<(Option<usize>, f64, bool)> = picks.iter().map(|p| match p {
                Some(a) => (Some(*a), 0.0, count[*a] > 1),
                None => (None, 0.0, false),
            }).collect();
            let o = outcome(&entries);
            let inc = instantaneous_pseudo_regret(&mu, &o).unwrap();
            prop_assert!(inc >= 0.0);
            let clean: BTreeSet<usize> = o.clean_arms().collect();
            prop_assert_eq!(inc == 0.0, clean == optimal_set(&mu, n).unwrap());
            // collision indicators always come in groups of two or more
            prop_assert_ne!(o.collision_count(), 1);
        }
    }
}
