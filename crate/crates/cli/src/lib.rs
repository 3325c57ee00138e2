//! Batch analytics front end: config handling, pipeline orchestration, and
//! the subcommand implementations behind the `iflow` binary.

pub mod commands;
pub mod config;
pub mod pipeline;
