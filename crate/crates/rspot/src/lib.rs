//! File formats, JSON reports and the `rspot` command line over `rspot-core`.

pub mod cli;
pub mod io;
pub mod report;

pub use cli::{main_with_args, run, CliError, RunConfig};
