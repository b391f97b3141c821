//! Command implementations behind the `poisson-lab` binary.

pub mod config;
pub mod frontier;
pub mod report;
pub mod simulate;
pub mod verify;
