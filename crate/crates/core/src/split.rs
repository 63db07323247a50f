//! Optimal depot insertion for a giant tour.
//!
//! Bellman recursion over the acyclic split graph: node `i` is the boundary
//! after the `i`-th customer and arc `(i, j)` is the route serving customers
//! `i..j`. Route costs are penalized (capacity excess and time warp are
//! soft), so every arc exists and the recursion is quadratic.

use crate::evaluate::PenaltyWeights;
use crate::model::{EpochInstance, GiantTour, RoutePlan, DEPOT};

/// Partitions `tour` into consecutive routes minimizing the penalized static
/// score. Ties go to fewer routes, then to the earliest split point.
pub fn split(tour: &GiantTour, epoch: &EpochInstance, weights: &PenaltyWeights) -> RoutePlan {
    let nodes = tour.as_slice();
    let n = nodes.len();
    if n == 0 {
        return RoutePlan::default();
    }

    let mut best = vec![f64::INFINITY; n + 1];
    let mut routes = vec![usize::MAX; n + 1];
    let mut pred = vec![0usize; n + 1];
    best[0] = 0.0;
    routes[0] = 0;

    for i in 0..n {
        let base = best[i];
        let base_routes = routes[i] + 1;
        let mut load = 0;
        let mut distance = 0;
        let mut warp = 0;
        let mut clock = epoch.departure_time;
        let mut prev = DEPOT;
        for (j, &node) in nodes.iter().enumerate().skip(i) {
            load += epoch.demand(node);
            distance += epoch.travel(prev, node);
            clock = (clock + epoch.service_time(prev) + epoch.travel(prev, node)).max(epoch.tw_start(node));
            if clock > epoch.tw_end(node) {
                warp += clock - epoch.tw_end(node);
                clock = epoch.tw_end(node);
            }
            prev = node;

            let excess = (load - epoch.capacity).max(0);
            let score = weights.dist * (distance + epoch.travel(node, DEPOT)) as f64 + weights.violation(excess, warp);
            let candidate = base + score;
            let end = j + 1;
            if candidate < best[end] || (candidate == best[end] && base_routes < routes[end]) {
                best[end] = candidate;
                routes[end] = base_routes;
                pred[end] = i;
            }
        }
    }

    let mut plan = Vec::with_capacity(routes[n]);
    let mut end = n;
    while end > 0 {
        let start = pred[end];
        plan.push(nodes[start..end].to_vec());
        end = start;
    }
    plan.reverse();
    RoutePlan::new(plan)
}
