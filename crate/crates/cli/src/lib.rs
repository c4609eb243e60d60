//! Command-line orchestration for the `ivnet` tool: configuration, atomic
//! outputs with a run manifest, and one entry point per subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod stages;

pub use commands::{run, Cli};
pub use error::{CliError, ErrorKind};
