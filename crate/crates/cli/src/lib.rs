//! Scenario-driven front end for `qecqm-core`.
//!
//! A scenario file names a model, an initial probe state, a round protocol
//! and a list of analyses. [`config::parse_config`] validates it,
//! [`runner::run_scenario`] executes it and [`report::RunReport`] renders the
//! result as CSV tables and a JSON document. [`corpus`] holds the shipped
//! scenarios and compares their reports against golden files.

pub mod config;
pub mod corpus;
pub mod report;
pub mod runner;
pub mod scenario;

pub use config::{parse_config, serialize, Analysis, ConfigError, Issue, ScenarioConfig};
pub use report::{Format, RunReport};
pub use runner::{run_config, run_scenario};
pub use scenario::Scenario;
