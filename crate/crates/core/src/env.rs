//! Arms, user population and slot-synchronous collision resolution.
//!
//! Time is slotted. In every round each active user either transmits on one
//! arm or refrains; the environment then resolves the round. A user alone on
//! an arm receives an i.i.d. draw from that arm; every user sharing an arm
//! with someone else receives zero and sees its collision indicator set.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, StreamRng, ENV_STREAM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("arm set must contain at least one arm")]
    NoArms,
    #[error("expected reward {mu} of arm {arm} is outside [0, 1]")]
    MeanOutOfRange { arm: usize, mu: f64 },
    #[error("user {user} listed more than once in the schedule")]
    DuplicateUser { user: UserId },
    #[error("user {user} joins at round {join}; rounds start at 1")]
    JoinBeforeStart { user: UserId, join: u64 },
    #[error("user {user} leaves at round {leave}, not after its join at {join}")]
    LeaveBeforeJoin { user: UserId, join: u64, leave: u64 },
    #[error("schedule event for user {user} at round {time} is out of order")]
    EventOrder { user: UserId, time: u64 },
    #[error("no user is active at round {t}")]
    EmptyPopulation { t: u64 },
    #[error("{users} users active at round {t} but only {arms} arms")]
    TooManyUsers { t: u64, users: usize, arms: usize },
    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("choices at round {t} do not match the active users")]
    ChoiceMismatch { t: u64 },
}

/// Reward distribution family of the arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    #[default]
    Bernoulli,
}

/// The bandit: one expected reward per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSet {
    mu: Vec<f64>,
    kind: RewardKind,
}

impl ArmSet {
    pub fn bernoulli(mu: Vec<f64>) -> Result<Self, EnvError> {
        Self::new(mu, RewardKind::Bernoulli)
    }

    pub fn new(mu: Vec<f64>, kind: RewardKind) -> Result<Self, EnvError> {
        if mu.is_empty() {
            return Err(EnvError::NoArms);
        }
        if let Some((arm, &m)) = mu.iter().enumerate().find(|(_, m)| !(0.0..=1.0).contains(*m)) {
            return Err(EnvError::MeanOutOfRange { arm, mu: m });
        }
        Ok(Self { mu, kind })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    fn draw(&self, arm: usize, rng: &mut StreamRng) -> f64 {
        match self.kind {
            RewardKind::Bernoulli => {
                if rng::bernoulli(self.mu[arm], rng) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub usize);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// What a user does in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Transmit(usize),
    Refrain,
}

impl Action {
    pub fn arm(self) -> Option<usize> {
        match self {
            Action::Transmit(k) => Some(k),
            Action::Refrain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Join,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub time: u64,
    pub user: UserId,
    pub kind: EventKind,
}

/// Presence interval of one user: active for `join <= t < leave`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSpan {
    pub id: UserId,
    pub join: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leave: Option<u64>,
}

impl UserSpan {
    pub fn is_active(&self, t: u64) -> bool {
        t >= self.join && self.leave.is_none_or(|l| t < l)
    }
}

/// Arrivals and departures over time. Events take effect at the start of the
/// named round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserSchedule {
    spans: Vec<UserSpan>,
}

impl UserSchedule {
    /// `n` users all present from round 1 on.
    pub fn fixed(n: usize) -> Self {
        Self { spans: (0..n).map(|i| UserSpan { id: UserId(i), join: 1, leave: None }).collect() }
    }

    pub fn from_spans(mut spans: Vec<UserSpan>) -> Result<Self, EnvError> {
        spans.sort_by_key(|s| s.id);
        for pair in spans.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(EnvError::DuplicateUser { user: pair[0].id });
            }
        }
        for s in &spans {
            if s.join == 0 {
                return Err(EnvError::JoinBeforeStart { user: s.id, join: s.join });
            }
            if let Some(leave) = s.leave {
                if leave <= s.join {
                    return Err(EnvError::LeaveBeforeJoin { user: s.id, join: s.join, leave });
                }
            }
        }
        let schedule = Self { spans };
        schedule.check_population()?;
        Ok(schedule)
    }

    /// Builds a schedule from an event list. Each user joins once and leaves
    /// at most once, later.
    pub fn from_events(events: &[ScheduleEvent]) -> Result<Self, EnvError> {
        let mut spans: Vec<UserSpan> = Vec::new();
        for ev in events {
            let pos = spans.iter().position(|s| s.id == ev.user);
            match (ev.kind, pos) {
                (EventKind::Join, None) => spans.push(UserSpan { id: ev.user, join: ev.time, leave: None }),
                (EventKind::Leave, Some(i)) if spans[i].leave.is_none() => {
                    if ev.time <= spans[i].join {
                        return Err(EnvError::LeaveBeforeJoin { user: ev.user, join: spans[i].join, leave: ev.time });
                    }
                    spans[i].leave = Some(ev.time);
                }
                _ => return Err(EnvError::EventOrder { user: ev.user, time: ev.time }),
            }
        }
        Self::from_spans(spans)
    }

    pub fn spans(&self) -> &[UserSpan] {
        &self.spans
    }

    pub fn span(&self, user: UserId) -> Option<&UserSpan> {
        self.spans.iter().find(|s| s.id == user)
    }

    pub fn user_count(&self) -> usize {
        self.spans.len()
    }

    /// All events ordered by time; departures precede arrivals at equal times.
    pub fn events(&self) -> Vec<ScheduleEvent> {
        let mut events: Vec<ScheduleEvent> = self
            .spans
            .iter()
            .flat_map(|s| {
                let join = ScheduleEvent { time: s.join, user: s.id, kind: EventKind::Join };
                let leave = s.leave.map(|time| ScheduleEvent { time, user: s.id, kind: EventKind::Leave });
                std::iter::once(join).chain(leave)
            })
            .collect();
        events.sort_by_key(|e| (e.time, std::cmp::Reverse(e.kind), e.user));
        events
    }

    /// Distinct rounds after round 1 at which the population changes.
    pub fn change_times(&self) -> Vec<u64> {
        let mut times: Vec<u64> = self.events().iter().map(|e| e.time).filter(|&t| t > 1).collect();
        times.dedup();
        times
    }

    pub fn active_at(&self, t: u64) -> Vec<UserId> {
        self.spans.iter().filter(|s| s.is_active(t)).map(|s| s.id).collect()
    }

    pub fn count_at(&self, t: u64) -> usize {
        self.spans.iter().filter(|s| s.is_active(t)).count()
    }

    /// Largest number of simultaneously active users.
    pub fn max_concurrent(&self) -> usize {
        std::iter::once(1).chain(self.change_times()).map(|t| self.count_at(t)).max().unwrap_or(0)
    }

    fn check_population(&self) -> Result<(), EnvError> {
        for t in std::iter::once(1).chain(self.change_times()) {
            if self.count_at(t) == 0 {
                return Err(EnvError::EmptyPopulation { t });
            }
        }
        Ok(())
    }
}

/// Result of one round for one active user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    pub user: UserId,
    pub action: Action,
    pub reward: f64,
    pub collided: bool,
}

/// Resolution of one round, one entry per active user in id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundOutcome {
    pub t: u64,
    pub users: Vec<UserOutcome>,
}

impl RoundOutcome {
    pub fn collision_count(&self) -> usize {
        self.users.iter().filter(|u| u.collided).count()
    }

    /// Arms occupied by exactly one transmitting user.
    pub fn clean_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.users.iter().filter(|u| !u.collided).filter_map(|u| u.action.arm())
    }
}

/// The shared bandit together with its population schedule and reward stream.
#[derive(Debug, Clone)]
pub struct Environment {
    arms: ArmSet,
    schedule: UserSchedule,
    t: u64,
    rng: StreamRng,
    occupancy: Vec<u32>,
}

impl Environment {
    pub fn new(arms: ArmSet, schedule: UserSchedule, seed: u64) -> Result<Self, EnvError> {
        let k = arms.len();
        for t in std::iter::once(1).chain(schedule.change_times()) {
            let users = schedule.count_at(t);
            if users > k {
                return Err(EnvError::TooManyUsers { t, users, arms: k });
            }
        }
        Ok(Self { arms, schedule, t: 1, rng: rng::stream(seed, ENV_STREAM), occupancy: vec![0; k] })
    }

    /// The round that will be resolved next.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn schedule(&self) -> &UserSchedule {
        &self.schedule
    }

    pub fn active_users(&self, t: u64) -> Vec<UserId> {
        self.schedule.active_at(t)
    }

    /// Resolves the current round and advances time. `choices` must list the
    /// active users of the current round in id order.
    pub fn resolve_round(&mut self, choices: &[(UserId, Action)]) -> Result<RoundOutcome, EnvError> {
        let t = self.t;
        let k = self.arms.len();
        let mut active = self.schedule.spans.iter().filter(|s| s.is_active(t)).map(|s| s.id);
        let matches = choices.iter().all(|(u, _)| active.next() == Some(*u)) && active.next().is_none();
        if !matches {
            return Err(EnvError::ChoiceMismatch { t });
        }

        self.occupancy.iter_mut().for_each(|c| *c = 0);
        for (_, action) in choices {
            if let Action::Transmit(arm) = *action {
                if arm >= k {
                    return Err(EnvError::ArmOutOfRange { arm, arms: k });
                }
                self.occupancy[arm] += 1;
            }
        }

        let users = choices
            .iter()
            .map(|&(user, action)| {
                let (reward, collided) = match action {
                    Action::Refrain => (0.0, false),
                    Action::Transmit(arm) if self.occupancy[arm] > 1 => (0.0, true),
                    Action::Transmit(arm) => (self.arms.draw(arm, &mut self.rng), false),
                };
                UserOutcome { user, action, reward, collided }
            })
            .collect();

        self.t += 1;
        Ok(RoundOutcome { t, users })
    }
}
