//! Command-line pipeline for contrastive pretraining, unlearning,
//! evaluation and data-owner audits.

pub mod commands;
pub mod config;
pub mod pipeline;

pub use commands::{exit_code, run, Cli, Command};
pub use config::RunConfig;
