//! Command-line front end for `pmcal`: CSV ingestion, JSON reports and
//! plot-data output.

pub mod commands;
pub mod error;
pub mod ingest;
pub mod plot;
pub mod report;

pub use error::{CliError, Result};
