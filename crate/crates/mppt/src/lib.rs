//! Command-line front end for the MPPT toolkit: TOML configuration, CSV and
//! JSON output formats, and the `simulate`, `train`, `compare` and `sweep`
//! commands.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};
