//! Closed-form regret bounds for MEGA.
//!
//! All logarithms are natural. Each function evaluates one expression; the
//! validity conditions under which the expression is a bound are checked and
//! reported as [`BoundError`]s rather than silently evaluated.

use thiserror::Error;

use crate::policy::{exploration_scale, MegaParams};

/// The value of β that balances the collision and availability terms.
pub const OPTIMAL_BETA: f64 = 2.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("outside validity ({0})")]
    OutsideValidity(String),
}

fn invalid(msg: impl Into<String>) -> BoundError {
    BoundError::InvalidInput(msg.into())
}

/// Rounds learning needs before every user holds an ε-correct ranking of the
/// `n` best arms with probability at least `1 − δ`:
/// `T = 2 · 4Kᴺ N / (ε² Π_{i=1}^{N−1}(K − i)) · ln(2K/δ)`, before rounding.
pub fn learning_time_exact(arms: usize, users: usize, eps_rank: f64, delta: f64) -> Result<f64, BoundError> {
    if users == 0 || users > arms {
        return Err(invalid(format!("need 1 <= N <= K, got N = {users}, K = {arms}")));
    }
    if eps_rank.is_nan() || eps_rank <= 0.0 {
        return Err(invalid(format!("ranking tolerance must be positive, got {eps_rank}")));
    }
    let k = arms as f64;
    // ln(2K/δ) must be positive for the bound to mean anything
    if delta.is_nan() || delta <= 0.0 || delta >= 2.0 * k {
        return Err(invalid(format!("delta must lie in (0, 2K), got {delta}")));
    }
    let n = users as f64;
    let product: f64 = (1..users).map(|i| k - i as f64).product();
    Ok(2.0 * 4.0 * k.powi(users as i32) * n / (eps_rank * eps_rank * product) * (2.0 * k / delta).ln())
}

/// [`learning_time_exact`] rounded up to whole rounds. Relative representation
/// error below 1e-12 is ignored when rounding.
pub fn learning_time(arms: usize, users: usize, eps_rank: f64, delta: f64) -> Result<u64, BoundError> {
    let exact = learning_time_exact(arms, users, eps_rank, delta)?;
    Ok((exact * (1.0 - 1e-12)).ceil() as u64)
}

/// Exploration constant `c = d²(K−1)T/K²` that keeps `ε_t = 1` for all `t < T`.
pub fn c_from_learning_time(d: f64, arms: usize, learning_time: u64) -> Result<f64, BoundError> {
    if arms < 2 {
        return Err(invalid(format!("need K >= 2, got {arms}")));
    }
    let k = arms as f64;
    Ok(d * d * (k - 1.0) * learning_time as f64 / (k * k))
}

/// Probability that `n` users picking uniformly among `k` arms are not all
/// on distinct arms: `1 − Π_{i=1}^{N−1}(1 − i/K)`.
pub fn birthday_collision_prob(users: usize, arms: usize) -> Result<f64, BoundError> {
    if users == 0 || users > arms {
        return Err(invalid(format!("need 1 <= N <= K, got N = {users}, K = {arms}")));
    }
    let k = arms as f64;
    Ok(1.0 - (1..users).map(|i| 1.0 - i as f64 / k).product::<f64>())
}

/// Bounds on the mean collision-event length and the derived coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionConstants {
    /// `1/(1 − p0)`
    pub l_up: f64,
    /// `1/(1 − p0²)`
    pub l_low: f64,
    /// `L_up / √L_low`
    pub c1: f64,
}

pub fn collision_constants(p0: f64) -> CollisionConstants {
    let l_up = 1.0 / (1.0 - p0);
    let l_low = 1.0 / (1.0 - p0 * p0);
    CollisionConstants { l_up, l_low, c1: l_up / l_low.sqrt() }
}

/// Expected collisions between two users on one arm up to `t`:
/// `(2 L_up / √L_low) t^{1−β/2}`.
pub fn pairwise_collision_bound(t: u64, p0: f64, beta: f64) -> f64 {
    2.0 * collision_constants(p0).c1 * (t as f64).powf(1.0 - beta / 2.0)
}

/// Regret from collisions over all users and arms: `C₁ N² K t^{1−β/2}`.
pub fn total_collision_regret_bound(t: u64, users: usize, arms: usize, p0: f64, beta: f64) -> f64 {
    let n = users as f64;
    collision_constants(p0).c1 * n * n * arms as f64 * (t as f64).powf(1.0 - beta / 2.0)
}

/// Rounds of forced exploration, `⌈cK²/(d²(K−1))⌉`.
pub fn exploration_rounds(c: f64, d: f64, arms: usize) -> u64 {
    exploration_scale(c, d, arms).ceil() as u64
}

/// Regret from random exploration, valid for `t` past the forced-exploration
/// phase: `Nm + cK²N/(d²(K−1)) · ln t` with `m = cK²/(d²(K−1))`.
pub fn exploration_regret_bound(t: u64, users: usize, arms: usize, c: f64, d: f64) -> Result<f64, BoundError> {
    if arms < 2 {
        return Err(invalid(format!("need K >= 2, got {arms}")));
    }
    let m_rounds = exploration_rounds(c, d, arms);
    if t <= m_rounds {
        return Err(BoundError::OutsideValidity(format!("t = {t} must exceed m = {m_rounds}")));
    }
    let m = exploration_scale(c, d, arms);
    let n = users as f64;
    Ok(n * m + m * n * (t as f64).ln())
}

/// Constants of the availability bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvailabilityConstants {
    /// `2cK²/(d(K−1)) + (5 − α)/(1 − α)`
    pub c0: f64,
    /// `C₀ + 2`
    pub c2: f64,
    /// `1 + 8 C₂`
    pub c3: f64,
}

/// The first term of `C₀` divides by `d`, not `d²`; kept as published.
pub fn availability_constants(c: f64, d: f64, arms: usize, alpha: f64) -> AvailabilityConstants {
    let k = arms as f64;
    let c0 = 2.0 * c * k * k / (d * (k - 1.0)) + (5.0 - alpha) / (1.0 - alpha);
    let c2 = c0 + 2.0;
    AvailabilityConstants { c0, c2, c3: 1.0 + 8.0 * c2 }
}

/// `NKT + NK C₃ t^β` evaluated without checking β.
pub fn availability_regret_formula(t: u64, users: usize, arms: usize, learning_time: u64, params: &MegaParams) -> f64 {
    let nk = (users * arms) as f64;
    let c3 = availability_constants(params.c, params.d, arms, params.alpha).c3;
    nk * learning_time as f64 + nk * c3 * (t as f64).powf(params.beta)
}

/// Regret from arms of K* being marked unavailable: `NKT + NK C₃ t^β`,
/// established for β > 2/3 only.
pub fn availability_regret_bound(
    t: u64,
    users: usize,
    arms: usize,
    learning_time: u64,
    params: &MegaParams,
) -> Result<f64, BoundError> {
    if params.beta <= OPTIMAL_BETA {
        return Err(BoundError::OutsideValidity("β ≤ 2/3".into()));
    }
    if arms < 2 {
        return Err(invalid(format!("need K >= 2, got {arms}")));
    }
    Ok(availability_regret_formula(t, users, arms, learning_time, params))
}

fn total_formula(
    t: u64,
    users: usize,
    arms: usize,
    learning_time: u64,
    params: &MegaParams,
) -> Result<f64, BoundError> {
    Ok(total_collision_regret_bound(t, users, arms, params.p0, params.beta)
        + availability_regret_formula(t, users, arms, learning_time, params)
        + exploration_regret_bound(t, users, arms, params.c, params.d)?)
}

fn check_total_domain(t: u64, arms: usize, learning_time: u64, params: &MegaParams) -> Result<(), BoundError> {
    if arms < 2 {
        return Err(invalid(format!("need K >= 2, got {arms}")));
    }
    let m = exploration_rounds(params.c, params.d, arms);
    if t <= m.max(learning_time) {
        return Err(BoundError::OutsideValidity(format!("t = {t} must exceed max(m, T) = {}", m.max(learning_time))));
    }
    Ok(())
}

/// Total regret bound for `t > max(m, T)`: the sum of the collision,
/// availability and exploration bounds.
pub fn total_regret_bound(
    t: u64,
    users: usize,
    arms: usize,
    learning_time: u64,
    params: &MegaParams,
) -> Result<f64, BoundError> {
    check_total_domain(t, arms, learning_time, params)?;
    Ok(total_collision_regret_bound(t, users, arms, params.p0, params.beta)
        + availability_regret_bound(t, users, arms, learning_time, params)?
        + exploration_regret_bound(t, users, arms, params.c, params.d)?)
}

/// The total bound with β replaced by 2/3, where both power-law terms grow as
/// `t^{2/3}`. That β sits on the edge of the availability term's validity, so
/// the value is the formula evaluated there, not a certified bound.
pub fn total_regret_bound_at_optimal_beta(
    t: u64,
    users: usize,
    arms: usize,
    learning_time: u64,
    params: &MegaParams,
) -> Result<f64, BoundError> {
    let params = MegaParams { beta: OPTIMAL_BETA, ..*params };
    check_total_domain(t, arms, learning_time, &params)?;
    total_formula(t, users, arms, learning_time, &params)
}

/// Regret accumulated between a departure at `t` and the new optimal
/// configuration, with `users_after` users remaining:
/// `(2^{(β+1)(N−1)} − 1)/(2^{β+1} − 1) · t^β`.
pub fn dynamic_departure_bound(t: u64, users_after: usize, beta: f64) -> f64 {
    if users_after <= 1 {
        return 0.0;
    }
    let ratio = 2f64.powf(beta + 1.0);
    (ratio.powf((users_after - 1) as f64) - 1.0) / (ratio - 1.0) * (t as f64).powf(beta)
}

/// Everything the bound table needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub arms: usize,
    pub users: usize,
    pub t: u64,
    pub params: MegaParams,
    /// Learning time T; derived from `eps_rank` and `delta` when absent.
    pub learning_time: Option<u64>,
    pub eps_rank: f64,
    pub delta: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            arms: 9,
            users: 6,
            t: 10_000,
            params: MegaParams::default(),
            learning_time: Some(1000),
            eps_rank: 0.05,
            delta: 0.1,
        }
    }
}

/// One named entry of [`bound_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub name: &'static str,
    pub value: Result<f64, BoundError>,
}

/// Evaluates every bound for `inputs`. A failing entry does not prevent the
/// others from being computed.
pub fn bound_table(inputs: &BoundInputs) -> Vec<BoundRow> {
    let BoundInputs { arms, users, t, params, eps_rank, delta, .. } = *inputs;
    let derived_t = learning_time(arms, users, eps_rank, delta);
    let learning = inputs.learning_time.map_or(derived_t.clone(), Ok);
    let cc = collision_constants(params.p0);
    let ac = availability_constants(params.c, params.d, arms, params.alpha);
    let with_learning = |f: &dyn Fn(u64) -> Result<f64, BoundError>| learning.clone().and_then(f);

    vec![
        BoundRow { name: "learning_time_from_eps_delta", value: derived_t.clone().map(|v| v as f64) },
        BoundRow { name: "learning_time_used", value: learning.clone().map(|v| v as f64) },
        BoundRow { name: "c_from_learning_time", value: with_learning(&|lt| c_from_learning_time(params.d, arms, lt)) },
        BoundRow { name: "birthday_collision_prob", value: birthday_collision_prob(users, arms) },
        BoundRow { name: "exploration_rounds_m", value: Ok(exploration_rounds(params.c, params.d, arms) as f64) },
        BoundRow { name: "l_up", value: Ok(cc.l_up) },
        BoundRow { name: "l_low", value: Ok(cc.l_low) },
        BoundRow { name: "c1", value: Ok(cc.c1) },
        BoundRow { name: "c2", value: Ok(ac.c2) },
        BoundRow { name: "c3", value: Ok(ac.c3) },
        BoundRow { name: "pairwise_collision_bound", value: Ok(pairwise_collision_bound(t, params.p0, params.beta)) },
        BoundRow {
            name: "total_collision_regret_bound",
            value: Ok(total_collision_regret_bound(t, users, arms, params.p0, params.beta)),
        },
        BoundRow {
            name: "exploration_regret_bound",
            value: exploration_regret_bound(t, users, arms, params.c, params.d),
        },
        BoundRow {
            name: "availability_regret_bound",
            value: with_learning(&|lt| availability_regret_bound(t, users, arms, lt, &params)),
        },
        BoundRow {
            name: "total_regret_bound",
            value: with_learning(&|lt| total_regret_bound(t, users, arms, lt, &params)),
        },
        BoundRow {
            name: "total_regret_bound_beta_2_3",
            value: with_learning(&|lt| total_regret_bound_at_optimal_beta(t, users, arms, lt, &params)),
        },
        BoundRow { name: "dynamic_departure_bound", value: Ok(dynamic_departure_bound(t, users, params.beta)) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn learning_time_examples() {
        assert_eq!(learning_time(2, 2, 0.1, 0.1).unwrap(), 23609);
        assert_eq!(learning_time(2, 1, 1.0, 4.0 / std::f64::consts::E).unwrap(), 16);
        let a = learning_time_exact(4, 2, 1.0, 0.1).unwrap();
        let b = learning_time_exact(4, 2, 10.0, 0.1).unwrap();
        let c = learning_time_exact(4, 2, 1000.0, 0.1).unwrap();
        assert!(a > b && b > c && c < 1e-3 * a);
        assert!(learning_time(3, 3, 0.1, 0.1).is_ok());
        assert!(learning_time(2, 3, 0.1, 0.1).is_err());
        assert!(learning_time(2, 2, 0.1, 4.0).is_err());
        assert!(learning_time(2, 2, 0.0, 0.1).is_err());
    }

    #[test]
    fn c_from_learning_time_examples() {
        assert!(rel(c_from_learning_time(0.05, 2, 23609).unwrap(), 14.755625) < 1e-12);
        assert_eq!(c_from_learning_time(1.0, 2, 4).unwrap(), 1.0);
        assert!(c_from_learning_time(1.0, 1, 4).is_err());
    }

    #[test]
    fn derived_c_keeps_exploration_certain_before_t() {
        use crate::policy::epsilon_t;
        for (k, lt) in [(2usize, 23609u64), (9, 1000), (12, 5000)] {
            let c = c_from_learning_time(0.05, k, lt).unwrap();
            let params = MegaParams { c, ..MegaParams::default() };
            for t in [1, lt / 2, lt - 1] {
                assert!((epsilon_t(&params, k, t).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn birthday_examples() {
        assert_eq!(birthday_collision_prob(1, 7).unwrap(), 0.0);
        assert!((birthday_collision_prob(2, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((birthday_collision_prob(3, 10).unwrap() - 0.28).abs() < 1e-15);
        assert!(birthday_collision_prob(3, 2).is_err());
    }

    #[test]
    fn collision_examples() {
        let cc = collision_constants(0.6);
        assert!(rel(cc.l_up, 2.5) < 1e-12);
        assert!(rel(cc.l_low, 1.5625) < 1e-12);
        assert!(rel(2.0 * cc.c1, 4.0) < 1e-12);
        assert!(rel(pairwise_collision_bound(100_000, 0.6, 0.8), 4000.0) < 1e-9);
        assert!(rel(total_collision_regret_bound(100_000, 2, 2, 0.6, 0.8), 16000.0) < 1e-9);
        // β → 0 leaves the linear coefficient
        assert!(rel(pairwise_collision_bound(1000, 0.6, 1e-12), 4000.0) < 1e-9);
    }

    #[test]
    fn exploration_examples() {
        assert_eq!(exploration_rounds(0.1, 0.05, 9), 405);
        let v = exploration_regret_bound(10_000, 6, 9, 0.1, 0.05).unwrap();
        assert!((v - (2430.0 + 2430.0 * 10_000f64.ln())).abs() < 1e-6);
        assert!((v - 24811.1).abs() < 0.1);
        assert_eq!(exploration_regret_bound(10_000, 0, 9, 0.1, 0.05).unwrap(), 0.0);
        assert!(exploration_regret_bound(405, 6, 9, 0.1, 0.05).is_err());
    }

    #[test]
    fn availability_examples() {
        let ac = availability_constants(0.1, 0.05, 9, 0.5);
        assert!(rel(ac.c2, 51.5) < 1e-12);
        assert!(rel(ac.c3, 413.0) < 1e-12);
        let p = MegaParams::default();
        let v = availability_regret_bound(10_000, 6, 9, 1000, &p).unwrap();
        assert!(rel(v, 54_000.0 + 22_302.0 * 10f64.powf(3.2)) < 1e-9);
        assert!(rel(v, 3.539e7) < 1e-3);
        assert!(rel(availability_regret_bound(1, 6, 9, 0, &p).unwrap(), 54.0 * 413.0) < 1e-12);
        let low = MegaParams { beta: 0.5, ..p };
        assert!(matches!(availability_regret_bound(10_000, 6, 9, 1000, &low), Err(BoundError::OutsideValidity(_))));
    }

    #[test]
    fn total_is_sum_of_components() {
        let p = MegaParams::default();
        let total = total_regret_bound(10_000, 6, 9, 1000, &p).unwrap();
        let parts = total_collision_regret_bound(10_000, 6, 9, p.p0, p.beta)
            + availability_regret_bound(10_000, 6, 9, 1000, &p).unwrap()
            + exploration_regret_bound(10_000, 6, 9, p.c, p.d).unwrap();
        assert_eq!(total, parts);
        assert!(total_regret_bound(900, 6, 9, 1000, &p).is_err());
        assert!(total_regret_bound_at_optimal_beta(10_000, 6, 9, 1000, &p).is_ok());
    }

    #[test]
    fn departure_examples() {
        assert_eq!(dynamic_departure_bound(1000, 1, 0.8), 0.0);
        assert!(rel(dynamic_departure_bound(1000, 2, 0.8), 1000f64.powf(0.8)) < 1e-12);
        assert!((dynamic_departure_bound(1000, 2, 0.8) - 251.19).abs() < 0.01);
        assert!((dynamic_departure_bound(1000, 3, 0.8) - 1125.9).abs() < 0.05);
    }

    #[test]
    fn bounds_grow_with_t() {
        let p = MegaParams::default();
        let ts = [1_000u64, 2_000, 10_000, 100_000, 1_000_000];
        for w in ts.windows(2) {
            assert!(pairwise_collision_bound(w[0], 0.6, 0.8) <= pairwise_collision_bound(w[1], 0.6, 0.8));
            assert!(
                total_regret_bound(w[0], 6, 9, 500, &p).unwrap() <= total_regret_bound(w[1], 6, 9, 500, &p).unwrap()
            );
            assert!(dynamic_departure_bound(w[0], 4, 0.8) <= dynamic_departure_bound(w[1], 4, 0.8));
        }
    }

    #[test]
    fn table_reports_failures_per_row() {
        let inputs =
            BoundInputs { params: MegaParams { beta: 0.5, ..MegaParams::default() }, ..BoundInputs::default() };
        let table = bound_table(&inputs);
        let avail = table.iter().find(|r| r.name == "availability_regret_bound").unwrap();
        assert!(avail.value.as_ref().unwrap_err().to_string().contains("outside validity"));
        assert!(table.iter().find(|r| r.name == "pairwise_collision_bound").unwrap().value.is_ok());

        let single = BoundInputs { users: 1, ..BoundInputs::default() };
        let dep = bound_table(&single).into_iter().find(|r| r.name == "dynamic_departure_bound").unwrap();
        assert_eq!(dep.value, Ok(0.0));
    }
}
