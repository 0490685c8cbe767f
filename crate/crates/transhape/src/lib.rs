//! Command-line front end for transient step-response shaping.
//!
//! Scenarios are TOML files (or embedded presets) naming a catalog plant, the
//! compensator gains, the step, solver settings and metric options. Commands
//! turn them into trajectory CSVs and JSON reports.
#![warn(missing_docs)]

mod error;
pub mod io;
pub mod reproduce;
pub mod run;
pub mod scenario;

pub use error::{CliError, Result};
pub use reproduce::{reproduce, Experiment, Summary};
pub use run::{run_scenario, stability_report, sweep, sweep_csv, Outcome, ReportDocument, RunResult, SweepParam, SweepRow};
pub use scenario::{preset, preset_names, Scenario};
