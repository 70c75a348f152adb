//! Library side of the `fr3coex` command-line tool: configuration, output
//! files, CDF summaries and the subcommands themselves.

pub mod cdf;
pub mod commands;
pub mod config;
pub mod output;
