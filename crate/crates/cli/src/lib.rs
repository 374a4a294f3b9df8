//! Scenario runner behind the `translab` command-line tool.

pub mod config;
pub mod registry;
pub mod scenario;

pub use config::{Command, Format, ScenarioConfig};
pub use scenario::{
    emit_report, load_family, load_map, load_multi_objective, report_json, run_scenario, Outcome, Report,
};
