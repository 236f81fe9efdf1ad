//! Round-by-round driver tying the environment to one policy per user.

use thiserror::Error;

use crate::env::{Action, ArmSet, EnvError, Environment, RoundOutcome, UserId, UserSchedule, UserSpan};
use crate::metrics::{MetricsError, RegretTrace, TraceRecorder};
use crate::policy::{Policy, PolicyConfig, PolicyError};
use crate::rng::{self, user_stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("user ids must be 0..{0} without gaps")]
    UserIds(usize),
}

struct Participant {
    span: UserSpan,
    policy: Box<dyn Policy>,
}

/// One repetition: an environment plus every user's policy.
///
/// Each user's policy runs on its own clock, which reads 1 in the round the
/// user joins. Policies for all scheduled users are created up front, each
/// with its own random stream, so a user's behaviour does not depend on when
/// other users come and go.
pub struct Simulation {
    env: Environment,
    users: Vec<Participant>,
    choices: Vec<(UserId, Action)>,
}

impl Simulation {
    pub fn new(arms: ArmSet, schedule: UserSchedule, policy: &PolicyConfig, seed: u64) -> Result<Self, SimError> {
        let k = arms.len();
        let spans = schedule.spans().to_vec();
        if spans.iter().enumerate().any(|(i, s)| s.id.0 != i) {
            return Err(SimError::UserIds(spans.len()));
        }
        let users = spans
            .into_iter()
            .map(|span| {
                let policy = policy.build(k, rng::stream(seed, user_stream(span.id.0)))?;
                Ok(Participant { span, policy })
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        let env = Environment::new(arms, schedule, seed)?;
        Ok(Self { env, users, choices: Vec::new() })
    }

    /// The round that the next [`step`](Self::step) resolves.
    pub fn round(&self) -> u64 {
        self.env.round()
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Plays one round.
    pub fn step(&mut self) -> Result<RoundOutcome, SimError> {
        let t = self.env.round();
        self.choices.clear();
        for p in self.users.iter_mut().filter(|p| p.span.is_active(t)) {
            let local = t - p.span.join + 1;
            self.choices.push((p.span.id, p.policy.select(local)));
        }
        let outcome = self.env.resolve_round(&self.choices)?;
        for o in &outcome.users {
            let p = &mut self.users[o.user.0];
            let local = t - p.span.join + 1;
            p.policy.update(local, o.action, o.reward, o.collided)?;
        }
        Ok(outcome)
    }
}

/// Runs `horizon` rounds and records cumulative series every `stride` rounds.
pub fn run_repetition(
    arms: &ArmSet,
    schedule: &UserSchedule,
    policy: &PolicyConfig,
    seed: u64,
    horizon: u64,
    stride: u64,
) -> Result<RegretTrace, SimError> {
    let mut sim = Simulation::new(arms.clone(), schedule.clone(), policy, seed)?;
    let mut recorder = TraceRecorder::new(arms.means(), sim.user_count(), stride);
    for _ in 0..horizon {
        let outcome = sim.step()?;
        recorder.record(&outcome)?;
    }
    Ok(recorder.finish())
}
