//! Service and command-line front end for the fuzzy supervisor.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod server;
