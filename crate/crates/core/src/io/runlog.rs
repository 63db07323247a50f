//! JSON-lines run logs.
//!
//! One JSON object per line, discriminated by `record`:
//!
//! - `header`: `strategy`, `seed`, `budget_s`, `sim` (epoch_count,
//!   epoch_duration, requests_per_epoch, horizon_start), `solver` (the full
//!   solver configuration) and `instance` (the base instance).
//! - `epoch`, once per epoch in order: `epoch`, `departure_time`,
//!   `dispatched` (request ids in route order), `routes` (lists of request
//!   ids), `cost` (total route distance), `wall_time_s` (absent when timing
//!   is omitted) and `iterations`.
//! - `summary`: `total_cost`, `seed`, `config_hash`.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{EpochRecord, RunOutcome, Strategy};
use crate::error::{LogError, SimError};
use crate::hgs::SolverConfig;
use crate::io::config::config_hash;
use crate::model::{ProblemInstance, RoutePlan};
use crate::sim::{SimConfig, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub strategy: Strategy,
    pub seed: u64,
    pub budget_s: f64,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub instance: ProblemInstance,
}

impl RunHeader {
    pub fn config_hash(&self) -> String {
        config_hash(&self.sim, &self.solver, self.budget_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEpoch {
    pub epoch: usize,
    pub departure_time: i64,
    pub dispatched: Vec<u64>,
    pub routes: Vec<Vec<u64>>,
    pub cost: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_cost: i64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum LogRecord {
    Header(RunHeader),
    Epoch(LoggedEpoch),
    Summary(RunSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub epochs: Vec<LoggedEpoch>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn from_outcome(header: RunHeader, outcome: &RunOutcome, with_timing: bool) -> Self {
        let epochs = outcome
            .epochs
            .iter()
            .map(|e: &EpochRecord| LoggedEpoch {
                epoch: e.epoch,
                departure_time: e.departure_time,
                dispatched: e.dispatched.clone(),
                routes: e.routes.clone(),
                cost: e.cost,
                wall_time_s: with_timing.then_some(e.wall_time_s),
                iterations: e.iterations,
            })
            .collect();
        let summary = RunSummary {
            total_cost: outcome.total_cost,
            seed: header.seed,
            config_hash: header.config_hash(),
        };
        RunLog {
            header,
            epochs,
            summary,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut line = |record: LogRecord| -> std::io::Result<()> {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")
        };
        line(LogRecord::Header(self.header.clone()))?;
        for e in &self.epochs {
            line(LogRecord::Epoch(e.clone()))?;
        }
        line(LogRecord::Summary(self.summary.clone()))?;
        out.flush()
    }

    pub fn write_file(&self, path: &Path) -> Result<(), LogError> {
        let io_err = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        self.write(std::io::BufWriter::new(file)).map_err(io_err)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, LogError> {
        let mut header = None;
        let mut epochs = Vec::new();
        let mut summary = None;
        for (i, line) in input.lines().enumerate() {
            let no = i + 1;
            let line = line.map_err(|e| LogError::Format {
                line: no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Format {
                line: no,
                message: e.to_string(),
            })?;
            let misplaced = |what: &str| LogError::Format {
                line: no,
                message: format!("unexpected {what} record"),
            };
            match record {
                LogRecord::Header(h) if header.is_none() => header = Some(h),
                LogRecord::Header(_) => return Err(misplaced("header")),
                LogRecord::Epoch(_) | LogRecord::Summary(_) if header.is_none() => {
                    return Err(misplaced("record before the header"))
                }
                LogRecord::Epoch(_) | LogRecord::Summary(_) if summary.is_some() => {
                    return Err(misplaced("record after the summary"))
                }
                LogRecord::Epoch(e) => epochs.push(e),
                LogRecord::Summary(s) => summary = Some(s),
            }
        }
        let missing = |what: &str| LogError::Format {
            line: 0,
            message: format!("missing {what} record"),
        };
        Ok(RunLog {
            header: header.ok_or_else(|| missing("header"))?,
            epochs,
            summary: summary.ok_or_else(|| missing("summary"))?,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self, LogError> {
        let file = std::fs::File::open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunLog::read(std::io::BufReader::new(file))
    }
}

/// What a successful replay established.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub epochs: usize,
    pub requests: usize,
    pub total_cost: i64,
}

/// Rebuilds the simulator from the header and replays every epoch,
/// checking feasibility, must-go coverage, per-epoch and total costs,
/// that every request is dispatched exactly once, and the config hash.
pub fn replay(log: &RunLog) -> Result<ReplayReport, LogError> {
    let h = &log.header;
    let mut sim = Simulator::new(h.instance.clone(), h.sim, h.seed, false)?;
    let mut seen = HashSet::new();
    for e in &log.epochs {
        let fail = |message: String| LogError::Replay {
            epoch: e.epoch,
            message,
        };
        if sim.is_finished() {
            return Err(fail("run has more epochs than configured".into()));
        }
        if e.epoch != sim.epoch_index() {
            return Err(fail(format!("expected epoch {}", sim.epoch_index())));
        }
        let current = sim.current()?;
        if e.departure_time != current.departure_time {
            return Err(fail(format!(
                "departure time {} differs from {}",
                e.departure_time, current.departure_time
            )));
        }
        let flat: Vec<u64> = e.routes.iter().flatten().copied().collect();
        if flat != e.dispatched {
            return Err(fail("dispatched ids do not match the routes".into()));
        }
        let mut routes = Vec::with_capacity(e.routes.len());
        for r in &e.routes {
            let mut route = Vec::with_capacity(r.len());
            for &id in r {
                let node = current
                    .node_of(id)
                    .ok_or_else(|| fail(format!("request {id} is not pending")))?;
                route.push(node);
            }
            routes.push(route);
        }
        for &id in &flat {
            if !seen.insert(id) {
                return Err(fail(format!("request {id} dispatched twice")));
            }
        }
        let commitment = sim.step(&RoutePlan::new(routes)).map_err(|err| match err {
            SimError::InvalidCommitment { report, .. } => fail(report.to_string()),
            other => LogError::Sim(other),
        })?;
        if commitment.cost != e.cost {
            return Err(fail(format!(
                "logged cost {} but routes cost {}",
                e.cost, commitment.cost
            )));
        }
    }
    if !sim.is_finished() {
        return Err(LogError::Replay {
            epoch: sim.epoch_index(),
            message: "run ends before the final epoch".into(),
        });
    }
    if log.summary.total_cost != sim.total_cost() {
        return Err(LogError::Format {
            line: 0,
            message: format!(
                "summary total {} but epochs sum to {}",
                log.summary.total_cost,
                sim.total_cost()
            ),
        });
    }
    if log.summary.config_hash != h.config_hash() {
        return Err(LogError::Format {
            line: 0,
            message: "config hash does not match the header".into(),
        });
    }
    Ok(ReplayReport {
        epochs: log.epochs.len(),
        requests: seen.len(),
        total_cost: sim.total_cost(),
    })
}
