//! Command-line front end: config parsing, the analysis and solve flows,
//! and the report and CSV writers.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, Overrides, RunConfig};
pub use run::{execute, run, Command, Invocation, Outcome};
