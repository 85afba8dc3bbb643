//! Experiment driver for noise-induced quantum reservoirs: configuration, CSV exchange
//! and the subcommands behind the `qnr` binary.

pub mod commands;
pub mod config;
pub mod io;
