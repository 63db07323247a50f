//! Solver configuration files.
//!
//! ```toml
//! [population]
//! mu = 25
//! lambda = 40
//! elite = 4
//! n_closest = 5
//! target_feasible = 0.2
//! adapt_period = 100
//!
//! [search]
//! restart_after = 2000
//! stop_after = 5000
//! initial_orderings = 25
//!
//! [crossover]
//! candidates = 2
//!
//! [ls]
//! granularity = 20
//! phase1_max_sweeps = 50
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::hgs::SolverConfig;
use crate::sim::SimConfig;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "DVRPTW_CONFIG";

pub fn parse_config(text: &str, path: &Path) -> Result<SolverConfig, ConfigError> {
    let config: SolverConfig = toml::from_str(text).map_err(|source| ConfigError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    config.validate().map_err(ConfigError::Invalid)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SolverConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

/// Loads `explicit` if given, else the file named by [`CONFIG_ENV`], else
/// the defaults. Returns the file used, if any.
pub fn resolve_config(explicit: Option<&Path>) -> Result<(SolverConfig, Option<PathBuf>), ConfigError> {
    let path = explicit.map(Path::to_path_buf).or_else(|| {
        std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    match path {
        Some(p) => Ok((load_config(&p)?, Some(p))),
        None => Ok((SolverConfig::default(), None)),
    }
}

pub fn to_toml(config: &SolverConfig) -> String {
    toml::to_string(config).expect("solver configuration serializes")
}

/// Hex SHA-256 of the settings that shape a run, excluding strategy and
/// seed, so every row of one benchmark shares it.
pub fn config_hash(sim: &SimConfig, solver: &SolverConfig, budget_s: f64) -> String {
    let canonical = serde_json::json!({ "budget_s": budget_s, "sim": sim, "solver": solver });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}
