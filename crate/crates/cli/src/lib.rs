//! Front end for the JSQ-PS response-time solver: configuration, operator
//! cache, result files and the subcommands built on them.

pub mod cache;
pub mod commands;
pub mod config;
pub mod failure;
pub mod output;

pub use config::RunConfig;
pub use failure::Failure;
