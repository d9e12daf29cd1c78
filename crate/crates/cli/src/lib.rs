//! Command-line front end: CSV ingestion and the `test`, `stability` and
//! `simulate` subcommands.

pub mod commands;
pub mod dataset;

pub use commands::{run, Cli};
pub use dataset::{load_csv, to_csv, write_csv, ColumnRef, Dataset, DatasetError, DatasetFile};
