pub mod config;
pub mod mms;
pub mod pipeline;
pub mod scenarios;

pub use config::{parse_config, RunConfig};
pub use mms::{mms_convergence, MmsReport, MmsRow, MmsStudy};
pub use pipeline::{dispatch, exit_code, failure_json, Outcome, Subcommand};
pub use scenarios::{build as build_scenario, Built, Manufactured, ScenarioKind, ScenarioSpec};
