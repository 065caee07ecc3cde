//! Configuration, file formats, parallel sweeps and the command layer of the
//! `sblimp` command-line tool. The models themselves live in `sblimp-core`.

pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;
pub mod verify;

pub use sblimp_core as core;
