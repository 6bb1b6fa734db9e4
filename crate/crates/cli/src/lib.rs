//! Command-line front end for coilpose experiments.
//!
//! Runs named recipes or JSON configuration files and writes `records.csv`,
//! `summary.json`, `config.json` and `manifest.json` to an output directory.

pub mod app;
pub mod config;
pub mod output;
pub mod recipes;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A scenario could not be run.
    pub const RUNTIME: i32 = 1;
    /// Bad command-line usage.
    pub const USAGE: i32 = 2;
    pub const UNKNOWN_RECIPE: i32 = 3;
    pub const MALFORMED_CONFIG: i32 = 4;
    pub const UNWRITABLE_OUTPUT: i32 = 5;
    pub const UNREADABLE_CONFIG: i32 = 6;
}
