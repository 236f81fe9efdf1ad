//! Simulation of several uncoordinated users sharing one stochastic
//! multi-armed bandit, where a collision on an arm zeroes the reward of every
//! user involved.
//!
//! The crate provides the environment ([`env`]), the MEGA policy and the
//! baselines it is compared against ([`policy`]), regret bookkeeping
//! ([`metrics`]), closed-form regret bounds ([`bounds`]), a round-by-round
//! driver ([`sim`]) and scenario-level experiment running ([`experiment`]).

pub mod bounds;
pub mod env;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod sim;

pub use env::{Action, ArmSet, Environment, RoundOutcome, UserId, UserSchedule, UserSpan};
pub use experiment::{preset, run_scenario, Scenario};
pub use metrics::{aggregate, RegretTrace, TraceAggregate};
pub use policy::{MegaParams, Policy, PolicyConfig};
pub use sim::Simulation;
