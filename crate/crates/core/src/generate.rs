//! Seeded random base instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub customers: usize,
    /// Side of the square customers are scattered in; the depot sits at
    /// its centre.
    pub grid: f64,
    pub capacity: i64,
    pub max_demand: i64,
    /// Window starts are drawn from `[0, horizon]`.
    pub horizon: i64,
    pub min_width: i64,
    pub max_width: i64,
    pub min_service: i64,
    pub max_service: i64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            customers: 50,
            grid: 1000.0,
            capacity: 50,
            max_demand: 10,
            horizon: 18_000,
            min_width: 1800,
            max_width: 10_800,
            min_service: 60,
            max_service: 600,
        }
    }
}

/// Draws a base instance. Same parameters and seed, same instance.
pub fn generate_instance(params: &GeneratorParams, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.customers.max(1);
    let centre = params.grid / 2.0;
    let mut coords = vec![(centre, centre)];
    let mut demand = vec![0];
    let mut tw_start = vec![0];
    let mut tw_end = vec![params.horizon + 2 * params.max_width];
    let mut service = vec![0];
    for _ in 0..n {
        coords.push((
            rng.gen_range(0.0..=params.grid).round(),
            rng.gen_range(0.0..=params.grid).round(),
        ));
        demand.push(rng.gen_range(1..=params.max_demand.min(params.capacity)));
        let start = rng.gen_range(0..=params.horizon);
        tw_start.push(start);
        tw_end.push(start + rng.gen_range(params.min_width..=params.max_width));
        service.push(rng.gen_range(params.min_service..=params.max_service));
    }
    let name = format!("gen-n{n}-s{seed}");
    ProblemInstance::from_coords(name, coords, demand, tw_start, tw_end, service, params.capacity)
        .expect("generator parameters produce a valid instance")
}
