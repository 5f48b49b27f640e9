//! Command-line front end for `spinseq-core`: JSON run configs, CSV/JSON
//! outputs and thread-pool scans.

pub mod config;
pub mod output;
pub mod parallel;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigError, Mode, RunConfig};
pub use parallel::RayonMap;
pub use run::{run, RunError, RunOutcome};
