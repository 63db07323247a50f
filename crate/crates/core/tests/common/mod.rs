#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use dvrptw::evaluate::PenaltyWeights;
use dvrptw::model::{EpochInstance, ProblemInstance, Request, RoutePlan};

/// Random instance on a 100 x 100 grid with windows narrow enough that
/// long routes warp time.
pub fn random_base<R: Rng>(rng: &mut R, customers: usize, capacity: i64) -> ProblemInstance {
    let mut coords = vec![(50.0, 50.0)];
    let mut demand = vec![0];
    let mut tw_start = vec![0];
    let mut tw_end = vec![10_000];
    let mut service = vec![0];
    for _ in 0..customers {
        coords.push((rng.gen_range(0..=100) as f64, rng.gen_range(0..=100) as f64));
        demand.push(rng.gen_range(1..=capacity.min(10)));
        let s = rng.gen_range(0..=300);
        tw_start.push(s);
        tw_end.push(s + rng.gen_range(20..=200));
        service.push(rng.gen_range(0..=10));
    }
    ProblemInstance::from_coords("random", coords, demand, tw_start, tw_end, service, capacity).unwrap()
}

/// Epoch over every customer of `base`, each must-go with probability
/// `must_go`.
pub fn random_epoch<R: Rng>(
    rng: &mut R,
    base: &ProblemInstance,
    must_go: f64,
    t: usize,
    big_t: usize,
) -> EpochInstance {
    let requests = (1..=base.customer_count())
        .map(|c| Request {
            id: 100 + c as u64,
            profile: c,
            tw_start: base.tw_start[c],
            tw_end: base.tw_end[c],
            demand: base.demand[c],
            service_time: base.service_time[c],
            must_go: rng.gen_bool(must_go),
            first_epoch: 1,
        })
        .collect();
    EpochInstance::new(base, t, big_t, 0, requests).unwrap()
}

/// Independent event-by-event replay of one route: returns (distance, load,
/// time warp). The vehicle waits when early; when late it is charged the
/// lateness and continues as if it had arrived at the window end.
pub fn replay_route(route: &[usize], epoch: &EpochInstance) -> (i64, i64, i64) {
    if route.is_empty() {
        return (0, 0, 0);
    }
    let mut stops = vec![0];
    stops.extend_from_slice(route);
    stops.push(0);
    let mut now = epoch.departure_time;
    let (mut dist, mut load, mut warp) = (0, 0, 0);
    for leg in stops.windows(2) {
        let (from, to) = (leg[0], leg[1]);
        now += epoch.service_time(from);
        now += epoch.travel(from, to);
        dist += epoch.travel(from, to);
        if to == 0 {
            break;
        }
        load += epoch.demand(to);
        if now < epoch.tw_start(to) {
            now = epoch.tw_start(to);
        }
        if now > epoch.tw_end(to) {
            warp += now - epoch.tw_end(to);
            now = epoch.tw_end(to);
        }
    }
    (dist, load, warp)
}

pub fn route_score(route: &[usize], epoch: &EpochInstance, w: &PenaltyWeights) -> f64 {
    let (d, load, warp) = replay_route(route, epoch);
    let excess = (load - epoch.capacity).max(0);
    w.dist * d as f64 + w.cap * excess as f64 + w.time * warp as f64
}

pub fn plan_score(plan: &RoutePlan, epoch: &EpochInstance, w: &PenaltyWeights) -> f64 {
    plan.routes.iter().map(|r| route_score(r, epoch, w)).sum()
}

/// Integer-valued weights so that scores are exact in floating point.
pub fn integer_weights<R: Rng>(rng: &mut R) -> PenaltyWeights {
    PenaltyWeights {
        dist: 1.0,
        cap: rng.gen_range(1..=50) as f64,
        time: rng.gen_range(1..=50) as f64,
        late: 100.0,
    }
}

/// A random subset of `epoch`'s customers containing every must-go one,
/// in random order.
pub fn random_tour<R: Rng>(rng: &mut R, epoch: &EpochInstance, keep: f64) -> Vec<usize> {
    let mut nodes: Vec<usize> = epoch
        .customers()
        .filter(|&c| epoch.is_must_go(c) || rng.gen_bool(keep))
        .collect();
    nodes.shuffle(rng);
    nodes
}

/// Every way of cutting `tour` into consecutive non-empty routes.
pub fn all_partitions(tour: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if tour.is_empty() {
        return vec![Vec::new()];
    }
    let cuts = tour.len() - 1;
    (0..1u32 << cuts)
        .map(|mask| {
            let mut routes = vec![vec![tour[0]]];
            for (i, &c) in tour.iter().enumerate().skip(1) {
                if mask & (1 << (i - 1)) != 0 {
                    routes.push(Vec::new());
                }
                routes.last_mut().unwrap().push(c);
            }
            routes
        })
        .collect()
}
