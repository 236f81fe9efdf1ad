//! Scenario files.
//!
//! A scenario file is TOML: top-level scalars, then one `[[policies]]` table
//! per compared policy (tagged by `kind`) and one `[[users]]` table per user:
//!
//! ```toml
//! name = "fig3"
//! arms = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
//! horizon = 100000
//! repetitions = 50
//! seed = 2014
//! stride = 100
//!
//! [[policies]]
//! kind = "mega"
//! c = 0.1
//! d = 0.05
//! p0 = 0.6
//! alpha = 0.5
//! beta = 0.8
//!
//! [[policies]]
//! kind = "rho-rand"
//! users = 6
//!
//! [[users]]
//! id = 0
//! join = 1
//! # leave = 50000   (optional; the user is active for join <= t < leave)
//! ```
//!
//! Other policy kinds: `ucb1`, `kl-ucb`, and `eps-greedy` with `c` and `d`.

use std::path::Path;

use super::{Scenario, ScenarioError};

pub fn to_toml(scenario: &Scenario) -> Result<String, ScenarioError> {
    toml::to_string(scenario).map_err(|e| ScenarioError::Config(e.to_string()))
}

/// Parses and validates a scenario.
pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    from_toml(&std::fs::read_to_string(path)?)
}
