//! Pipeline commands behind the `serann` binary, with file-based handoffs
//! between stages.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;
pub mod store;

pub use commands::{run, Cli, Outcome};
