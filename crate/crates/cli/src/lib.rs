//! Batch front end: CSV ingestion, JSON run configurations, the test and
//! simulation commands, and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

pub use error::{exit_code, CliError, Result};
