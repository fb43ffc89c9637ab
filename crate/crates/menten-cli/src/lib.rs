//! Command-line harness around the reduction toolkit: scenario ingestion,
//! command execution, and artifact emission (CSV, JSON, SVG).

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

pub use commands::run_command;
