//! Configuration, presets and task runners behind the `dbar` binary.

pub mod config;
pub mod presets;
pub mod run;
