//! Hybrid genetic search for the dynamic vehicle routing problem with time
//! windows, an epoch-based simulator and a benchmark harness.

pub mod batch;
pub mod controller;
pub mod crossover;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod hgs;
pub mod io;
pub mod local_search;
pub mod model;
pub mod oracle;
pub mod population;
pub mod sim;
pub mod split;
