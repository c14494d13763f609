//! Files, configuration and the command-line front end for
//! [`plcwatch_core`].
//!
//! The binary is a thin wrapper around [`cli::main_with_args`]; every
//! subcommand is also callable as [`commands::run`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod store;

pub use config::{Command, RunConfig};
pub use error::{exit_code, AppError, Result};
