//! Library half of the `sugmine` binary: experiment configs and the command
//! implementations, exposed so integration tests can drive them directly.

pub mod commands;
pub mod config;
