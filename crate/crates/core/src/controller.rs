//! Dispatch strategies and the per-epoch decision loop.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::evaluate::{CostBreakdown, Objective};
use crate::hgs::{self, SolverConfig};
use crate::model::{EpochInstance, ProblemInstance, Request, RoutePlan};
use crate::oracle;
use crate::sim::{derive_seed, Commitment, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dhgs,
    Greedy,
    Lazy,
    Random,
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Dhgs,
        Strategy::Greedy,
        Strategy::Lazy,
        Strategy::Random,
        Strategy::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Dhgs => "dhgs",
            Strategy::Greedy => "greedy",
            Strategy::Lazy => "lazy",
            Strategy::Random => "random",
            Strategy::Oracle => "oracle",
        }
    }

    /// Per-epoch time budget this strategy receives for a base budget. The
    /// oracle gets twice as much.
    pub fn budget_multiplier(&self) -> u32 {
        match self {
            Strategy::Oracle => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| SolveError::UnknownStrategy(s.to_string()))
    }
}

/// Outcome of one epoch decision, in the epoch's node indices.
#[derive(Debug, Clone)]
pub struct EpochResult {
    pub epoch_index: usize,
    pub plan: RoutePlan,
    /// Total distance of `plan`.
    pub cost: i64,
    pub wall_time: Duration,
    pub iterations: usize,
}

/// Decides and routes one epoch with `strategy`.
///
/// Every strategy starts from the singleton routes of its customer set and
/// returns them if the budget runs out before anything better is found.
pub fn solve_epoch(
    epoch: &EpochInstance,
    strategy: Strategy,
    budget: Duration,
    config: &SolverConfig,
    seed: u64,
) -> Result<EpochResult, SolveError> {
    if budget.is_zero() {
        return Err(SolveError::NonPositiveBudget);
    }
    let start = Instant::now();
    let deadline = start + budget;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (plan, iterations) = match strategy {
        Strategy::Dhgs => {
            let incumbent = RoutePlan::singletons(&epoch.must_go_nodes());
            let out = hgs::run(
                epoch,
                Objective::Dynamic,
                config,
                incumbent,
                &[],
                deadline,
                None,
                &mut rng,
            );
            (out.plan, out.iterations)
        }
        Strategy::Greedy => route_fixed(
            epoch,
            &epoch.customers().collect::<Vec<_>>(),
            config,
            &[],
            deadline,
            &mut rng,
        ),
        Strategy::Lazy => route_fixed(epoch, &epoch.must_go_nodes(), config, &[], deadline, &mut rng),
        Strategy::Random => {
            let chosen: Vec<usize> = epoch
                .customers()
                .filter(|&c| epoch.is_must_go(c) || rng.gen_bool(0.5))
                .collect();
            route_fixed(epoch, &chosen, config, &[], deadline, &mut rng)
        }
        Strategy::Oracle => return Err(SolveError::OracleNeedsHindsight),
    };
    Ok(EpochResult {
        epoch_index: epoch.epoch_index,
        cost: CostBreakdown::of_plan(&plan, epoch).s_dist,
        plan,
        wall_time: start.elapsed(),
        iterations,
    })
}

/// Routes exactly the customers `nodes` of `epoch` with static HGS. `warm`
/// plans are in `epoch` node indices and must cover exactly `nodes`; the
/// first one, if any, is the incumbent instead of the singleton routes.
pub fn route_fixed<R: Rng + ?Sized>(
    epoch: &EpochInstance,
    nodes: &[usize],
    config: &SolverConfig,
    warm: &[RoutePlan],
    deadline: Instant,
    rng: &mut R,
) -> (RoutePlan, usize) {
    if nodes.is_empty() {
        return (RoutePlan::default(), 0);
    }
    let (sub, mapping) = epoch.restrict_fixed(nodes);
    let mut local = vec![usize::MAX; epoch.node_count()];
    for (i, &n) in mapping.iter().enumerate() {
        local[n] = i;
    }
    let to_sub =
        |p: &RoutePlan| RoutePlan::new(p.routes.iter().map(|r| r.iter().map(|&n| local[n]).collect()).collect());
    let warm_sub: Vec<RoutePlan> = warm.iter().map(to_sub).collect();
    let incumbent = warm_sub
        .first()
        .cloned()
        .unwrap_or_else(|| RoutePlan::singletons(&sub.must_go_nodes()));
    let out = hgs::run(
        &sub,
        Objective::Static,
        config,
        incumbent,
        &warm_sub,
        deadline,
        None,
        rng,
    );
    let plan = RoutePlan::new(
        out.plan
            .routes
            .iter()
            .map(|r| r.iter().map(|&n| mapping[n]).collect())
            .collect(),
    );
    (plan, out.iterations)
}

/// Static routing of every customer of `base` as a single epoch departing
/// at the depot's window start.
pub fn static_epoch(base: &ProblemInstance) -> Result<EpochInstance, SolveError> {
    let requests = (1..=base.customer_count())
        .map(|c| Request {
            id: c as u64,
            profile: c,
            tw_start: base.tw_start[c],
            tw_end: base.tw_end[c],
            demand: base.demand[c],
            service_time: base.service_time[c],
            must_go: true,
            first_epoch: 1,
        })
        .collect();
    Ok(EpochInstance::new(base, 1, 1, base.tw_start[0], requests).map_err(crate::error::SimError::from)?)
}

/// Routes every customer of `epoch` with static HGS within `budget`.
pub fn solve_static(epoch: &EpochInstance, config: &SolverConfig, budget: Duration, seed: u64) -> (RoutePlan, usize) {
    let nodes: Vec<usize> = epoch.customers().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    route_fixed(epoch, &nodes, config, &[], Instant::now() + budget, &mut rng)
}

/// One committed epoch of a dynamic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub departure_time: i64,
    pub dispatched: Vec<u64>,
    pub routes: Vec<Vec<u64>>,
    pub cost: i64,
    pub wall_time_s: f64,
    pub iterations: usize,
}

impl EpochRecord {
    pub fn new(c: Commitment, wall_time: Duration, iterations: usize) -> Self {
        EpochRecord {
            epoch: c.epoch,
            departure_time: c.departure_time,
            dispatched: c.dispatched,
            routes: c.routes,
            cost: c.cost,
            wall_time_s: wall_time.as_secs_f64(),
            iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub strategy: Strategy,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub total_cost: i64,
}

impl RunOutcome {
    pub fn wall_time_s(&self) -> f64 {
        self.epochs.iter().map(|e| e.wall_time_s).sum()
    }
}

/// Drives `sim` to the end with `strategy`, `budget` per epoch (doubled for
/// the oracle).
pub fn run_dynamic(
    sim: &mut Simulator,
    strategy: Strategy,
    budget: Duration,
    config: &SolverConfig,
    seed: u64,
) -> Result<RunOutcome, SolveError> {
    if budget.is_zero() {
        return Err(SolveError::NonPositiveBudget);
    }
    if strategy == Strategy::Oracle {
        return oracle::run_oracle(sim, budget, config, seed);
    }
    let mut epochs = Vec::with_capacity(sim.config().epoch_count);
    while !sim.is_finished() {
        let epoch = sim.current()?;
        let result = solve_epoch(
            &epoch,
            strategy,
            budget,
            config,
            derive_seed(seed, epoch.epoch_index as u64),
        )?;
        let commitment = sim.step(&result.plan)?;
        epochs.push(EpochRecord::new(commitment, result.wall_time, result.iterations));
    }
    Ok(RunOutcome {
        strategy,
        seed,
        epochs,
        total_cost: sim.total_cost(),
    })
}
