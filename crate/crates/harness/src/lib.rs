//! Suite runner, report emission and the pieces behind the `canesim` binary.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod seeds;

pub use config::{ResolvedSuite, RunConfig};
pub use error::{HarnessError, Result};
pub use report::{emit_report, ReportBody, RunReport, SuiteReport, TrialRecord};
pub use runner::{run_config, run_suite};
