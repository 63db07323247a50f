//! Benchmark results CSV.
//!
//! Columns, in order: `instance, strategy, seed, total_cost, epochs,
//! wall_time_s, config_hash`. One row per (instance, strategy, seed).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LogError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub strategy: String,
    pub seed: u64,
    pub total_cost: i64,
    pub epochs: usize,
    pub wall_time_s: f64,
    pub config_hash: String,
}

pub const COLUMNS: [&str; 7] = [
    "instance",
    "strategy",
    "seed",
    "total_cost",
    "epochs",
    "wall_time_s",
    "config_hash",
];

pub fn write_results<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_results_file(rows: &[ResultRow], path: &Path) -> Result<(), LogError> {
    let file = std::fs::File::create(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(rows, file)
}

pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, LogError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(LogError::Format {
            line: 1,
            message: format!("expected columns {}, found {}", COLUMNS.join(","), header.join(",")),
        });
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
