//! Scenario configuration, initial-condition recipes and run orchestration.

pub mod config;
pub mod recipes;
pub mod runner;

pub use config::{parse_config, ScenarioConfig};
pub use recipes::{build_state, RECIPES};
pub use runner::{build_initial_state, execute, run_scenario, Outcome, Probe};
