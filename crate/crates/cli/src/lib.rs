//! Pipeline commands behind the `ghm` binary. Every command is an ordinary
//! function so the test suites can drive the pipeline in-process.

pub mod commands;
pub mod workspace;

pub use workspace::Workspace;
