//! Configuration loading, command implementations and artifact export for
//! the `attitude` command-line tool.

pub mod commands;
pub mod config;
pub mod svg;
pub mod trajectory;

pub use commands::{run_check, run_plot, run_simulate, run_solve, simulate, CliError};
pub use config::{load_config, ConfigError, ManeuverConfig};
pub use trajectory::TrajectoryRecord;
