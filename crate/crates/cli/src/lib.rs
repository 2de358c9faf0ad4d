//! `ffevss` command-line tool.

pub mod cli;
pub mod results;

pub use cli::{run, Cli, Command};
pub use results::{load_instances, read_rows, write_rows, Method, ResultRow, Summary};
