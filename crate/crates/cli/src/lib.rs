//! Configuration loading, scenario orchestration and artifact output for the
//! `tcs` binary.

pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use error::CliError;
