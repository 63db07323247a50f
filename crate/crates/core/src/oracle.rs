//! Hindsight solver.
//!
//! Starts from the greedy run, then alternates two improvements over the
//! whole horizon: moving single requests to an adjacent epoch they may be
//! dispatched in, and re-routing each epoch's fixed customer set with static
//! HGS warm-started from the current plan. Only strict distance decreases
//! are accepted, so the result is never worse than greedy. The final plans
//! are replayed through the simulator.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{route_fixed, run_dynamic, EpochRecord, RunOutcome, Strategy};
use crate::error::{SimError, SolveError};
use crate::hgs::SolverConfig;
use crate::model::{EpochInstance, Request, RoutePlan, DEPOT};
use crate::sim::{derive_seed, Simulator};

const ORACLE_STREAM: u64 = 0x0AC1E;
const MAX_PASSES: usize = 20;

/// Routes as request ids, per epoch.
type Schedule = Vec<Vec<Vec<u64>>>;

/// Distance change, target epoch, and insertion route and position (a new
/// route when absent).
type Reassignment = (i64, usize, Option<(usize, usize)>);

struct Horizon<'a> {
    sim: &'a Simulator,
    requests: HashMap<u64, Request>,
    /// Latest epoch each request may be dispatched in.
    last: HashMap<u64, usize>,
}

impl<'a> Horizon<'a> {
    fn new(sim: &'a Simulator, arrivals: &[Vec<Request>]) -> Self {
        let big_t = sim.config().epoch_count;
        let mut requests = HashMap::new();
        let mut last = HashMap::new();
        for r in arrivals.iter().flatten() {
            let l = (r.first_epoch..=big_t)
                .find(|&t| sim.is_must_go_at(r, t))
                .unwrap_or(big_t);
            last.insert(r.id, l);
            requests.insert(r.id, r.clone());
        }
        Horizon { sim, requests, last }
    }

    fn departure(&self, t: usize) -> i64 {
        self.sim.config().departure(t)
    }

    /// Distance of a route leaving at epoch `t`, or `None` if it breaks a
    /// window or the capacity.
    fn route_distance(&self, route: &[u64], t: usize) -> Option<i64> {
        let base = self.sim.base();
        let mut clock = self.departure(t);
        let mut load = 0;
        let mut distance = 0;
        let mut prev = DEPOT;
        let mut prev_service = 0;
        for id in route {
            let r = &self.requests[id];
            let leg = base.travel[prev][r.profile];
            clock = (clock + prev_service + leg).max(r.tw_start);
            if clock > r.tw_end {
                return None;
            }
            distance += leg;
            load += r.demand;
            prev = r.profile;
            prev_service = r.service_time;
        }
        if load > base.capacity {
            return None;
        }
        Some(if route.is_empty() {
            0
        } else {
            distance + base.travel[prev][DEPOT]
        })
    }

    /// Epoch instance of epoch `t` with exactly `ids`, all must-go.
    fn epoch(&self, t: usize, ids: &[u64]) -> Result<EpochInstance, SimError> {
        let reqs = ids
            .iter()
            .map(|id| Request {
                must_go: true,
                ..self.requests[id].clone()
            })
            .collect();
        Ok(EpochInstance::new(
            self.sim.base(),
            t,
            self.sim.config().epoch_count,
            self.departure(t),
            reqs,
        )?)
    }

    /// Tries to move one request out of epoch `t` into an adjacent epoch,
    /// taking the best feasible insertion (or a new route) there. Returns
    /// whether the schedule changed.
    fn reassign_from(&self, schedule: &mut Schedule, t: usize, deadline: Instant) -> bool {
        let mut changed = false;
        let ids: Vec<u64> = schedule[t - 1].iter().flatten().copied().collect();
        for id in ids {
            if Instant::now() >= deadline {
                break;
            }
            let r = &self.requests[&id];
            let Some((ri, pi)) = locate(&schedule[t - 1], id) else {
                continue;
            };
            let route = &schedule[t - 1][ri];
            let before = self.route_distance(route, t).expect("schedule routes are feasible");
            let mut shorter = route.clone();
            shorter.remove(pi);
            let Some(after) = self.route_distance(&shorter, t) else {
                continue;
            };
            let removal = after - before;
            let mut best: Option<Reassignment> = None;
            for s in [t.wrapping_sub(1), t + 1] {
                if s < r.first_epoch || s > self.last[&id] || s == 0 {
                    continue;
                }
                let routes = &schedule[s - 1];
                let mut consider = |delta: i64, place: Option<(usize, usize)>| {
                    if removal + delta < 0 && best.is_none_or(|(d, _, _)| delta < d) {
                        best = Some((delta, s, place));
                    }
                };
                if let Some(single) = self.route_distance(&[id], s) {
                    consider(single, None);
                }
                for (k, route) in routes.iter().enumerate() {
                    let old = self.route_distance(route, s).expect("schedule routes are feasible");
                    for pos in 0..=route.len() {
                        let mut longer = route.clone();
                        longer.insert(pos, id);
                        if let Some(new) = self.route_distance(&longer, s) {
                            consider(new - old, Some((k, pos)));
                        }
                    }
                }
            }
            if let Some((_, s, place)) = best {
                if shorter.is_empty() {
                    schedule[t - 1].remove(ri);
                } else {
                    schedule[t - 1][ri] = shorter;
                }
                match place {
                    None => schedule[s - 1].push(vec![id]),
                    Some((k, pos)) => schedule[s - 1][k].insert(pos, id),
                }
                changed = true;
            }
        }
        changed
    }
}

fn locate(routes: &[Vec<u64>], id: u64) -> Option<(usize, usize)> {
    routes
        .iter()
        .enumerate()
        .find_map(|(k, r)| r.iter().position(|&x| x == id).map(|p| (k, p)))
}

fn schedule_cost(h: &Horizon, schedule: &Schedule) -> i64 {
    schedule
        .iter()
        .enumerate()
        .flat_map(|(i, routes)| routes.iter().map(move |r| (i + 1, r)))
        .map(|(t, r)| h.route_distance(r, t).expect("schedule routes are feasible"))
        .sum()
}

/// Solves the whole run in hindsight and commits the result through `sim`.
/// Each epoch's recorded wall time is its share of the greedy run plus the
/// improvement time spent on it, bounded by twice `budget`.
pub fn run_oracle(
    sim: &mut Simulator,
    budget: Duration,
    config: &SolverConfig,
    seed: u64,
) -> Result<RunOutcome, SolveError> {
    let arrivals = sim.arrivals().map_err(|_| SolveError::OracleNeedsHindsight)?.to_vec();
    let big_t = sim.config().epoch_count;
    let greedy = run_dynamic(&mut sim.clone(), Strategy::Greedy, budget, config, seed)?;
    let mut schedule: Schedule = greedy.epochs.iter().map(|e| e.routes.clone()).collect();
    let mut spent: Vec<Duration> = greedy
        .epochs
        .iter()
        .map(|e| Duration::from_secs_f64(e.wall_time_s))
        .collect();
    let mut iterations: Vec<usize> = greedy.epochs.iter().map(|e| e.iterations).collect();
    let allowance = budget * Strategy::Oracle.budget_multiplier();

    let horizon = Horizon::new(sim, &arrivals);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ORACLE_STREAM));
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for t in 1..=big_t {
            let Some(left) = allowance.checked_sub(spent[t - 1]).filter(|d| !d.is_zero()) else {
                continue;
            };
            let start = Instant::now();
            let deadline = start + left;
            changed |= horizon.reassign_from(&mut schedule, t, deadline);
            let ids: Vec<u64> = schedule[t - 1].iter().flatten().copied().collect();
            if !ids.is_empty() && Instant::now() < deadline {
                let epoch = horizon.epoch(t, &ids)?;
                let node: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i + 1)).collect();
                let current = RoutePlan::new(
                    schedule[t - 1]
                        .iter()
                        .map(|r| r.iter().map(|id| node[id]).collect())
                        .collect(),
                );
                let nodes: Vec<usize> = (1..=ids.len()).collect();
                let (plan, iters) = route_fixed(
                    &epoch,
                    &nodes,
                    config,
                    std::slice::from_ref(&current),
                    deadline,
                    &mut rng,
                );
                iterations[t - 1] += iters;
                let routes: Vec<Vec<u64>> = plan
                    .routes
                    .iter()
                    .map(|r| r.iter().map(|&n| ids[n - 1]).collect())
                    .collect();
                let old: i64 = schedule[t - 1]
                    .iter()
                    .map(|r| horizon.route_distance(r, t).unwrap())
                    .sum();
                let new: i64 = routes.iter().map(|r| horizon.route_distance(r, t).unwrap()).sum();
                if new < old {
                    schedule[t - 1] = routes;
                    changed = true;
                }
            }
            spent[t - 1] += start.elapsed();
        }
        if !changed {
            break;
        }
    }
    debug_assert!(schedule_cost(&horizon, &schedule) <= greedy.total_cost);

    let mut epochs = Vec::with_capacity(big_t);
    for (t, routes) in schedule.iter().enumerate() {
        let epoch = sim.current()?;
        let plan = RoutePlan::new(
            routes
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&id| epoch.node_of(id).expect("scheduled request is pending"))
                        .collect()
                })
                .collect(),
        );
        let commitment = sim.step(&plan)?;
        epochs.push(EpochRecord::new(commitment, spent[t], iterations[t]));
    }
    Ok(RunOutcome {
        strategy: Strategy::Oracle,
        seed,
        epochs,
        total_cost: sim.total_cost(),
    })
}
