//! File formats, parallel drivers and subcommands for the `marstrand` tool.

pub mod commands;
pub mod drivers;
pub mod error;
pub mod formats;

pub use error::{LabError, LabResult};
