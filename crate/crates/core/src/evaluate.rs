//! Route costing, penalized scores and the epoch-aware fitness.

use serde::{Deserialize, Serialize};

use crate::model::{EpochInstance, RoutePlan, DEPOT};

/// Weight on the lateness term of the fitness.
pub const LATENESS_WEIGHT: f64 = 100.0;
pub const MIN_PENALTY: f64 = 0.1;
pub const MAX_PENALTY: f64 = 100_000.0;

/// Distance, load and violations of a single route.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RouteCost {
    pub distance: i64,
    pub load: i64,
    pub excess: i64,
    pub time_warp: i64,
}

/// Evaluates an arbitrary node sequence as one depot-to-depot route leaving
/// at the epoch departure time.
///
/// Arriving before `tw_start` waits. Arriving after `tw_end` adds the excess
/// to the time warp and the visit is clocked at `tw_end`.
pub fn evaluate_nodes<I>(nodes: I, epoch: &EpochInstance) -> RouteCost
where
    I: IntoIterator<Item = usize>,
{
    let mut cost = RouteCost::default();
    let mut clock = epoch.departure_time;
    let mut prev = DEPOT;
    for node in nodes {
        cost.distance += epoch.travel(prev, node);
        cost.load += epoch.demand(node);
        clock = (clock + epoch.service_time(prev) + epoch.travel(prev, node)).max(epoch.tw_start(node));
        let late = clock - epoch.tw_end(node);
        if late > 0 {
            cost.time_warp += late;
            clock = epoch.tw_end(node);
        }
        prev = node;
    }
    if prev == DEPOT {
        return RouteCost::default();
    }
    cost.distance += epoch.travel(prev, DEPOT);
    cost.excess = (cost.load - epoch.capacity).max(0);
    cost
}

pub fn evaluate_route(route: &[usize], epoch: &EpochInstance) -> RouteCost {
    evaluate_nodes(route.iter().copied(), epoch)
}

/// Aggregate cost terms of a solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Total route distance.
    pub s_dist: i64,
    /// Total capacity excess in demand units.
    pub s_cap: i64,
    /// Total time warp in time units.
    pub s_time: i64,
    /// Sum of window ends of the dispatched customers.
    pub s_late: i64,
    /// Number of dispatched customers.
    pub n: usize,
}

impl CostBreakdown {
    pub fn of_plan(plan: &RoutePlan, epoch: &EpochInstance) -> Self {
        let mut total = CostBreakdown::default();
        for route in &plan.routes {
            total.add_route(&evaluate_route(route, epoch));
            for &c in route {
                total.s_late += epoch.tw_end(c);
                total.n += 1;
            }
        }
        total
    }

    pub fn add_route(&mut self, route: &RouteCost) {
        self.s_dist += route.distance;
        self.s_cap += route.excess;
        self.s_time += route.time_warp;
    }

    pub fn is_feasible(&self) -> bool {
        self.s_cap == 0 && self.s_time == 0
    }
}

/// Penalty coefficients. Only `cap` and `time` are adapted during search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub dist: f64,
    pub cap: f64,
    pub time: f64,
    pub late: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            dist: 1.0,
            cap: 1.0,
            time: 1.0,
            late: LATENESS_WEIGHT,
        }
    }
}

impl PenaltyWeights {
    /// Starting weights for an epoch: capacity penalty scaled so that one
    /// unit of the largest demand costs about one longest arc.
    pub fn initial(epoch: &EpochInstance) -> Self {
        let max_demand = epoch.max_demand().max(1) as f64;
        let cap = (epoch.max_travel() as f64 / max_demand).clamp(MIN_PENALTY, 1000.0);
        PenaltyWeights {
            cap,
            ..PenaltyWeights::default()
        }
    }

    /// Same weights with `cap` and `time` multiplied by `factor` and clamped.
    pub fn scaled(&self, factor: f64) -> Self {
        PenaltyWeights {
            cap: (self.cap * factor).clamp(MIN_PENALTY, MAX_PENALTY),
            time: (self.time * factor).clamp(MIN_PENALTY, MAX_PENALTY),
            ..*self
        }
    }

    #[inline]
    pub fn violation(&self, excess: i64, time_warp: i64) -> f64 {
        self.cap * excess as f64 + self.time * time_warp as f64
    }

    #[inline]
    pub fn route_score(&self, route: &RouteCost) -> f64 {
        self.dist * route.distance as f64 + self.violation(route.excess, route.time_warp)
    }
}

/// One adaptation step of a penalty weight given the observed feasible
/// fraction `feasible` and the target fraction.
pub fn adapt_weight(weight: f64, feasible: f64, target: f64) -> f64 {
    let next = if feasible < target - 0.05 {
        weight * 1.2
    } else if feasible > target + 0.05 {
        weight * 0.85
    } else {
        weight
    };
    next.clamp(MIN_PENALTY, MAX_PENALTY)
}

/// Epoch-normalized fitness; lower is better.
///
/// `(p_dist S_dist + p_cap S_cap + p_time S_time + p_late S_late)
///  / (((t - 1) / T + 1) (n + 1))`
pub fn fitness(cost: &CostBreakdown, weights: &PenaltyWeights, t: usize, epoch_count: usize) -> f64 {
    debug_assert!(epoch_count >= 1 && t >= 1 && t <= epoch_count);
    let numerator = weights.dist * cost.s_dist as f64
        + weights.cap * cost.s_cap as f64
        + weights.time * cost.s_time as f64
        + weights.late * cost.s_late as f64;
    let progress = (t as f64 - 1.0) / epoch_count as f64 + 1.0;
    numerator / (progress * (cost.n as f64 + 1.0))
}

/// Penalized routing score without lateness or normalization.
pub fn static_score(cost: &CostBreakdown, weights: &PenaltyWeights) -> f64 {
    weights.dist * cost.s_dist as f64 + weights.cap * cost.s_cap as f64 + weights.time * cost.s_time as f64
}

/// How individuals are ranked during a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Variable customer set, ranked by [`fitness`].
    Dynamic,
    /// Fixed customer set, ranked by [`static_score`].
    Static,
}

impl Objective {
    pub fn evaluate(&self, cost: &CostBreakdown, weights: &PenaltyWeights, epoch: &EpochInstance) -> f64 {
        self.evaluate_at(cost, weights, epoch.epoch_index, epoch.epoch_count)
    }

    pub fn evaluate_at(&self, cost: &CostBreakdown, weights: &PenaltyWeights, t: usize, epoch_count: usize) -> f64 {
        match self {
            Objective::Dynamic => fitness(cost, weights, t, epoch_count),
            Objective::Static => static_score(cost, weights),
        }
    }
}
