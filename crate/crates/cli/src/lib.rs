//! Experiment driver for the shiftmor solver: presets, configuration, runs and
//! CSV artifacts.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
