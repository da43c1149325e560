//! Command implementations behind the `cicl` binary. Everything is callable
//! as a library so tests (and other tools) can drive full runs in-process.

pub mod chart;
pub mod commands;
pub mod config;
pub mod manifest;

pub use config::{ExperimentConfig, Overrides};

/// Exit code mapping: 0 success, 1 config error, 2 data error, 3 numeric.
pub fn exit_code(err: &cicl_core::Error) -> u8 {
    match err {
        cicl_core::Error::Config(_) => 1,
        cicl_core::Error::Data(_) => 2,
        cicl_core::Error::Numeric(_) => 3,
        cicl_core::Error::Io(_) => 2,
    }
}
