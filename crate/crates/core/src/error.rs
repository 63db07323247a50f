use std::path::PathBuf;

use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("instance has no customers")]
    NoCustomers,
    #[error("{field} has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("vehicle capacity must be positive, got {0}")]
    NonPositiveCapacity(i64),
    #[error("travel[{0}][{0}] must be zero")]
    NonZeroDiagonal(usize),
    #[error("travel[{0}][{1}] is negative")]
    NegativeTravel(usize, usize),
    #[error("node {0} has tw_start > tw_end")]
    InvertedWindow(usize),
    #[error("node {0} has a negative service time")]
    NegativeService(usize),
    #[error("depot must have zero demand and zero service time")]
    DepotNotNeutral,
    #[error("node {node} has demand {demand}, must be in 1..={capacity}")]
    DemandOutOfRange { node: usize, demand: i64, capacity: i64 },
    #[error("epoch {index} is outside 1..={count}")]
    EpochOutOfRange { index: usize, count: usize },
    #[error("request refers to unknown customer profile {0}")]
    UnknownProfile(usize),
    #[error("request {0} has tw_start > tw_end")]
    InvertedRequestWindow(u64),
    #[error("request {0} appears twice")]
    DuplicateRequest(u64),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: field `{field}`: cannot parse {value:?}")]
    Field {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("customer section is empty")]
    NoCustomers,
    #[error("invalid instance: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("epoch {epoch}: commitment rejected: {report}")]
    InvalidCommitment { epoch: usize, report: ValidationReport },
    #[error("simulation already finished")]
    Finished,
    #[error("hindsight access requires hindsight mode")]
    HindsightDisabled,
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("time budget must be positive")]
    NonPositiveBudget,
    #[error("the oracle strategy needs hindsight mode")]
    OracleNeedsHindsight,
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run log line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("epoch {epoch}: {message}")]
    Replay { epoch: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}
