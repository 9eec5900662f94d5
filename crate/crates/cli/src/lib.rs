//! Command-line pipeline around the `bellgap` library: simulation, bounds,
//! evaluation, projection, optimization, efficiency thresholds and batch
//! reports, all reading and writing versioned JSON files.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod files;

pub use cli::{execute, run, Cli};
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_VALIDATION};
