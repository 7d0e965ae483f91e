//! Pipeline stages behind the `scatnet` command line tool.

pub mod commands;
pub mod config;
