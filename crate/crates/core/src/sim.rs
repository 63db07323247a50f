//! The epoch environment.
//!
//! All arrivals are drawn when the simulator is built, from a generator
//! seeded only by the run seed, so the request stream does not depend on
//! dispatch decisions and hindsight mode sees exactly what will happen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::evaluate::CostBreakdown;
use crate::model::{validate_plan, EpochInstance, ProblemInstance, Request, RoutePlan, DEPOT};

/// Mixes a seed with a stream index (splitmix64 finalizer), giving
/// independent generator seeds for the parts of one run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream index of the arrival process.
const ARRIVAL_STREAM: u64 = 0xA11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub epoch_count: usize,
    /// Time between consecutive dispatch times.
    pub epoch_duration: i64,
    /// Expected number of new requests per epoch.
    pub requests_per_epoch: f64,
    /// Dispatch time of the first epoch.
    pub horizon_start: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epoch_count: 5,
            epoch_duration: 3600,
            requests_per_epoch: 8.0,
            horizon_start: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.epoch_count == 0 {
            return Err(SimError::Config("epoch_count must be at least 1".into()));
        }
        if self.epoch_duration <= 0 {
            return Err(SimError::Config("epoch_duration must be positive".into()));
        }
        if !(self.requests_per_epoch >= 0.0 && self.requests_per_epoch.is_finite()) {
            return Err(SimError::Config(
                "requests_per_epoch must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Dispatch time of epoch `t` (1-based).
    pub fn departure(&self, t: usize) -> i64 {
        self.horizon_start + (t as i64 - 1) * self.epoch_duration
    }
}

/// Must-go rule: a request must leave now if a dedicated vehicle departing
/// at the next dispatch time would arrive after its window closes. Always
/// true in the last epoch.
pub fn must_go_rule(tw_end: i64, travel_from_depot: i64, next_departure: Option<i64>) -> bool {
    match next_departure {
        None => true,
        Some(d) => d + travel_from_depot > tw_end,
    }
}

/// What one accepted commitment did.
#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    pub epoch: usize,
    pub departure_time: i64,
    /// Dispatched request ids in route order.
    pub dispatched: Vec<u64>,
    /// Routes as request ids.
    pub routes: Vec<Vec<u64>>,
    /// Total route distance.
    pub cost: i64,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    base: ProblemInstance,
    config: SimConfig,
    seed: u64,
    hindsight: bool,
    arrivals: Vec<Vec<Request>>,
    pending: Vec<Request>,
    /// Current epoch, 1-based; `epoch_count + 1` once finished.
    epoch: usize,
    total_cost: i64,
}

impl Simulator {
    pub fn new(base: ProblemInstance, config: SimConfig, seed: u64, hindsight: bool) -> Result<Self, SimError> {
        base.validate()?;
        config.validate()?;
        let arrivals = sample_arrivals(&base, &config, seed);
        let mut sim = Simulator {
            base,
            config,
            seed,
            hindsight,
            arrivals,
            pending: Vec::new(),
            epoch: 1,
            total_cost: 0,
        };
        sim.admit_arrivals();
        Ok(sim)
    }

    pub fn base(&self) -> &ProblemInstance {
        &self.base
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_finished(&self) -> bool {
        self.epoch > self.config.epoch_count
    }

    /// Current 1-based epoch index.
    pub fn epoch_index(&self) -> usize {
        self.epoch
    }

    pub fn total_cost(&self) -> i64 {
        self.total_cost
    }

    /// Requests waiting to be dispatched, with must-go flags for the current
    /// epoch.
    pub fn pending(&self) -> &[Request] {
        &self.pending
    }

    /// Every request of the run grouped by arrival epoch. Only available in
    /// hindsight mode.
    pub fn arrivals(&self) -> Result<&[Vec<Request>], SimError> {
        if self.hindsight {
            Ok(&self.arrivals)
        } else {
            Err(SimError::HindsightDisabled)
        }
    }

    /// Must-go flag of `request` at epoch `t`.
    pub fn is_must_go_at(&self, request: &Request, t: usize) -> bool {
        let next = (t < self.config.epoch_count).then(|| self.config.departure(t + 1));
        must_go_rule(request.tw_end, self.base.travel[DEPOT][request.profile], next)
    }

    /// The subproblem of the current epoch.
    pub fn current(&self) -> Result<EpochInstance, SimError> {
        if self.is_finished() {
            return Err(SimError::Finished);
        }
        Ok(EpochInstance::new(
            &self.base,
            self.epoch,
            self.config.epoch_count,
            self.config.departure(self.epoch),
            self.pending.clone(),
        )?)
    }

    /// Commits `plan` (in the node indices of [`Simulator::current`]) and
    /// advances to the next epoch.
    pub fn step(&mut self, plan: &RoutePlan) -> Result<Commitment, SimError> {
        let epoch = self.current()?;
        let report = validate_plan(plan, &epoch);
        if !report.is_hard_feasible() {
            return Err(SimError::InvalidCommitment {
                epoch: self.epoch,
                report,
            });
        }
        let cost = CostBreakdown::of_plan(plan, &epoch).s_dist;
        let routes: Vec<Vec<u64>> = plan
            .routes
            .iter()
            .map(|r| r.iter().map(|&n| epoch.request(n).id).collect())
            .collect();
        let dispatched: Vec<u64> = routes.iter().flatten().copied().collect();
        let commitment = Commitment {
            epoch: self.epoch,
            departure_time: epoch.departure_time,
            dispatched,
            routes,
            cost,
        };
        let mut gone = vec![false; epoch.node_count()];
        for n in plan.nodes() {
            gone[n] = true;
        }
        self.pending = self
            .pending
            .drain(..)
            .enumerate()
            .filter(|(i, _)| !gone[i + 1])
            .map(|(_, r)| r)
            .collect();
        self.total_cost += cost;
        self.epoch += 1;
        if !self.is_finished() {
            self.admit_arrivals();
        }
        Ok(commitment)
    }

    fn admit_arrivals(&mut self) {
        let t = self.epoch;
        let fresh = self.arrivals[t - 1].clone();
        self.pending.extend(fresh);
        let flags: Vec<bool> = self.pending.iter().map(|r| self.is_must_go_at(r, t)).collect();
        for (r, flag) in self.pending.iter_mut().zip(flags) {
            r.must_go = flag;
        }
    }
}

/// Poisson-many requests per epoch, each cloning a uniformly drawn customer
/// profile. Windows are shifted so that a dedicated vehicle leaving at the
/// arrival epoch's dispatch time can serve the request.
fn sample_arrivals(base: &ProblemInstance, config: &SimConfig, seed: u64) -> Vec<Vec<Request>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ARRIVAL_STREAM));
    let poisson = (config.requests_per_epoch > 0.0).then(|| Poisson::new(config.requests_per_epoch).unwrap());
    let customers = base.customer_count();
    let mut next_id = 0u64;
    (1..=config.epoch_count)
        .map(|t| {
            let count = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
            let departure = config.departure(t);
            (0..count)
                .map(|_| {
                    let profile = rng.gen_range(1..=customers);
                    let width = base.tw_end[profile] - base.tw_start[profile];
                    let tw_start = base.tw_start[profile].max(departure + base.travel[DEPOT][profile]);
                    let request = Request {
                        id: next_id,
                        profile,
                        tw_start,
                        tw_end: tw_start + width,
                        demand: base.demand[profile],
                        service_time: base.service_time[profile],
                        must_go: false,
                        first_epoch: t,
                    };
                    next_id += 1;
                    request
                })
                .collect()
        })
        .collect()
}
