//! Command-line front end, file formats and replication output for
//! `saddle-flow-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod validate;

pub use cli::Cli;
pub use commands::execute;
pub use error::CliError;
