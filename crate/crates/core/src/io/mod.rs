//! File formats: Solomon instances, TOML solver configuration, JSON-lines
//! run logs and the results CSV.

pub mod config;
pub mod instance;
pub mod results;
pub mod runlog;
