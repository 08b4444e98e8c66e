//! Command-line driver for the `spikeq` equalizer: configuration files,
//! checkpoints, output directories and the subcommands built on them.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
