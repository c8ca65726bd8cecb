//! Command-line front end: CSV ingestion, configuration merging, the
//! `monitor`, `retro`, `calibrate`, `pvalue` and `simulate` commands, and
//! table / json-lines reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

pub use commands::{execute, run, Outcome};
pub use config::{Cli, Command, Settings};
pub use error::{CliError, CliResult};
pub use ingest::{ingest_csv, read_csv, TrainSplit};
