//! Local improvement.
//!
//! Phase 1 changes the set of dispatched customers (`delete`, `add`,
//! `swap-out`); phase 2 improves the routes with relocate, swap, intra-route
//! 2-opt and inter-route 2-opt*. Each call runs phase 1 to a fixed point and
//! then phase 2 to a fixed point, so the returned plan is a routing local
//! optimum.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evaluate::{evaluate_nodes, fitness, CostBreakdown, Objective, PenaltyWeights, RouteCost};
use crate::model::{EpochInstance, RoutePlan, DEPOT};

const NONE: usize = usize::MAX;

/// `candidate` is a strict improvement over `current`, up to float noise.
#[inline]
pub fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - 1e-9 * current.abs().max(1.0)
}

/// For each node, the `granularity` nearest other customers by travel cost.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    lists: Vec<Vec<usize>>,
}

impl Neighborhood {
    pub fn new(epoch: &EpochInstance, granularity: usize) -> Self {
        let mut lists = vec![Vec::new()];
        for u in epoch.customers() {
            let mut others: Vec<usize> = epoch.customers().filter(|&v| v != u).collect();
            others.sort_by_key(|&v| (epoch.travel(u, v), v));
            others.truncate(granularity);
            lists.push(others);
        }
        Neighborhood { lists }
    }

    pub fn of(&self, node: usize) -> &[usize] {
        &self.lists[node]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsParams {
    pub granularity: usize,
    pub phase1_max_sweeps: usize,
}

impl Default for LsParams {
    fn default() -> Self {
        LsParams {
            granularity: 20,
            phase1_max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Delete,
    Add,
    SwapOut,
    Relocate,
    Swap,
    TwoOpt,
    TwoOptStar,
}

/// An accepted move, recorded when tracing is enabled.
#[derive(Debug, Clone)]
pub struct MoveRecord {
    pub kind: MoveKind,
    pub before: RoutePlan,
    pub after: RoutePlan,
}

/// Local search bound to one epoch.
pub struct LocalSearch<'a> {
    epoch: &'a EpochInstance,
    neighborhood: &'a Neighborhood,
    params: LsParams,
    objective: Objective,
    trace: Option<Vec<MoveRecord>>,
}

impl<'a> LocalSearch<'a> {
    pub fn new(
        epoch: &'a EpochInstance,
        neighborhood: &'a Neighborhood,
        params: LsParams,
        objective: Objective,
    ) -> Self {
        LocalSearch {
            epoch,
            neighborhood,
            params,
            objective,
            trace: None,
        }
    }

    /// Records every accepted move with the plans before and after it.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn take_trace(&mut self) -> Vec<MoveRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn improve<R: Rng + ?Sized>(&mut self, plan: &RoutePlan, weights: &PenaltyWeights, rng: &mut R) -> RoutePlan {
        let mut work = Work::new(self.epoch, *weights, plan);
        let selecting = self.objective == Objective::Dynamic && !self.epoch.optional_nodes().is_empty();
        if selecting {
            self.customer_selection(&mut work, rng);
        }
        self.routing(&mut work, rng);
        work.plan()
    }

    fn record(&mut self, kind: MoveKind, before: Option<RoutePlan>, work: &Work) {
        if let (Some(trace), Some(before)) = (self.trace.as_mut(), before) {
            trace.push(MoveRecord {
                kind,
                before,
                after: work.plan(),
            });
        }
    }

    fn snapshot(&self, work: &Work) -> Option<RoutePlan> {
        self.trace.as_ref().map(|_| work.plan())
    }

    // ---- phase 1 -------------------------------------------------------

    fn customer_selection<R: Rng + ?Sized>(&mut self, work: &mut Work, rng: &mut R) {
        let optional = self.epoch.optional_nodes();
        let mut tabu = vec![false; self.epoch.node_count()];
        for _ in 0..self.params.phase1_max_sweeps {
            let mut fired = false;
            let mut order = optional.clone();
            order.shuffle(rng);
            for &c in &order {
                if work.route_of[c] != NONE && self.try_delete(work, c) {
                    tabu[c] = true;
                    fired = true;
                }
            }
            order.shuffle(rng);
            for &c in &order {
                if work.route_of[c] == NONE && !tabu[c] && self.try_add(work, c) {
                    fired = true;
                }
            }
            order.shuffle(rng);
            for &c in &order {
                if work.route_of[c] != NONE && self.try_swap_out(work, c) {
                    fired = true;
                }
            }
            if !fired {
                break;
            }
        }
    }

    fn try_delete(&mut self, work: &mut Work, c: usize) -> bool {
        let r = work.route_of[c];
        let p = work.pos_of[c];
        let route = &work.routes[r];
        let new = work.eval(&[&route[..p], &route[p + 1..]]);
        let old = work.costs[r];
        let w = &work.weights;
        if !improves(
            w.violation(new.excess, new.time_warp),
            w.violation(old.excess, old.time_warp),
        ) {
            return false;
        }
        let before = self.snapshot(work);
        let mut nodes = work.routes[r].clone();
        nodes.remove(p);
        work.set_route(r, nodes, new);
        work.route_of[c] = NONE;
        work.cleanup();
        self.record(MoveKind::Delete, before, work);
        true
    }

    fn try_add(&mut self, work: &mut Work, c: usize) -> bool {
        let epoch = self.epoch;
        let w = work.weights;
        let alone = work.eval(&[&[c]]);
        // (score delta, route or NONE for a fresh route, position, new cost)
        let mut best = (w.route_score(&alone), NONE, 0, alone);
        for r in 0..work.routes.len() {
            let route = &work.routes[r];
            let old = work.costs[r];
            let old_score = w.route_score(&old);
            let slack = w.violation(old.excess, old.time_warp);
            for k in 0..=route.len() {
                let a = if k == 0 { DEPOT } else { route[k - 1] };
                let b = if k == route.len() { DEPOT } else { route[k] };
                let detour = epoch.travel(a, c) + epoch.travel(c, b) - epoch.travel(a, b);
                if w.dist * detour as f64 - slack >= best.0 {
                    continue;
                }
                let new = work.eval(&[&route[..k], &[c], &route[k..]]);
                let delta = w.route_score(&new) - old_score;
                if delta < best.0 {
                    best = (delta, r, k, new);
                }
            }
        }
        let (_, r, k, new) = best;
        let current = work.breakdown();
        let mut candidate = current;
        if r != NONE {
            let old = work.costs[r];
            candidate.s_dist += new.distance - old.distance;
            candidate.s_cap += new.excess - old.excess;
            candidate.s_time += new.time_warp - old.time_warp;
        } else {
            candidate.add_route(&new);
        }
        candidate.s_late += epoch.tw_end(c);
        candidate.n += 1;
        let (t, big_t) = (epoch.epoch_index, epoch.epoch_count);
        if !improves(fitness(&candidate, &w, t, big_t), fitness(&current, &w, t, big_t)) {
            return false;
        }
        let before = self.snapshot(work);
        if r == NONE {
            work.push_route(vec![c], new);
        } else {
            let mut nodes = work.routes[r].clone();
            nodes.insert(k, c);
            work.set_route(r, nodes, new);
        }
        self.record(MoveKind::Add, before, work);
        true
    }

    fn try_swap_out(&mut self, work: &mut Work, c_in: usize) -> bool {
        let r = work.route_of[c_in];
        let p = work.pos_of[c_in];
        let old = work.costs[r];
        let old_score = work.weights.route_score(&old);
        let hood = self.neighborhood;
        for &c_out in hood.of(c_in) {
            if work.route_of[c_out] != NONE || self.epoch.is_must_go(c_out) {
                continue;
            }
            let route = &work.routes[r];
            let new = work.eval(&[&route[..p], &[c_out], &route[p + 1..]]);
            if !improves(work.weights.route_score(&new), old_score) {
                continue;
            }
            let before = self.snapshot(work);
            let mut nodes = route.clone();
            nodes[p] = c_out;
            work.route_of[c_in] = NONE;
            work.set_route(r, nodes, new);
            self.record(MoveKind::SwapOut, before, work);
            return true;
        }
        false
    }

    // ---- phase 2 -------------------------------------------------------

    fn routing<R: Rng + ?Sized>(&mut self, work: &mut Work, rng: &mut R) {
        let mut order: Vec<usize> = work.routes.iter().flatten().copied().collect();
        order.shuffle(rng);
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); self.epoch.node_count()];
        for &u in &order {
            let mut list = self.neighborhood.of(u).to_vec();
            list.shuffle(rng);
            neighbors[u] = list;
        }
        loop {
            let mut fired = false;
            for &u in &order {
                for &v in &neighbors[u] {
                    if work.route_of[v] == NONE {
                        continue;
                    }
                    if self.try_pair_moves(work, u, v) {
                        fired = true;
                    }
                }
                if self.try_relocate_new_route(work, u) {
                    fired = true;
                }
            }
            if !fired {
                return;
            }
        }
    }

    fn try_pair_moves(&mut self, work: &mut Work, u: usize, v: usize) -> bool {
        let (rv, pv) = (work.route_of[v], work.pos_of[v]);
        if self.try_relocate(work, u, rv, pv + 1) {
            return true;
        }
        let (rv, pv) = (work.route_of[v], work.pos_of[v]);
        if self.try_relocate(work, u, rv, pv) {
            return true;
        }
        if self.try_swap(work, u, v) {
            return true;
        }
        if work.route_of[u] == work.route_of[v] {
            self.try_two_opt(work, u, v)
        } else {
            self.try_two_opt_star(work, u, v)
        }
    }

    /// Moves `u` so that it sits before index `k` of route `rv` (indices
    /// refer to the route before the move).
    fn try_relocate(&mut self, work: &mut Work, u: usize, rv: usize, k: usize) -> bool {
        let epoch = self.epoch;
        let (ru, pu) = (work.route_of[u], work.pos_of[u]);
        if ru == rv && (k == pu || k == pu + 1) {
            return false;
        }
        let target = &work.routes[rv];
        let a = if k == 0 { DEPOT } else { target[k - 1] };
        let b = if k == target.len() { DEPOT } else { target[k] };
        let (p, s) = (work.pred(u), work.succ(u));
        let delta =
            epoch.travel(p, s) - epoch.travel(p, u) - epoch.travel(u, s) + epoch.travel(a, u) + epoch.travel(u, b)
                - epoch.travel(a, b);
        let w = work.weights;
        if ru == rv {
            let route = &work.routes[ru];
            let old = work.costs[ru];
            if !lower_bound_admits(&w, &[old], delta) {
                return false;
            }
            let mut nodes = route.clone();
            nodes.remove(pu);
            nodes.insert(if k > pu { k - 1 } else { k }, u);
            let new = work.eval(&[&nodes]);
            if !improves(w.route_score(&new), w.route_score(&old)) {
                return false;
            }
            let before = self.snapshot(work);
            work.set_route(ru, nodes, new);
            self.record(MoveKind::Relocate, before, work);
            return true;
        }
        let (old_u, old_v) = (work.costs[ru], work.costs[rv]);
        if !lower_bound_admits(&w, &[old_u, old_v], delta) {
            return false;
        }
        let from = &work.routes[ru];
        let to = &work.routes[rv];
        let new_u = work.eval(&[&from[..pu], &from[pu + 1..]]);
        let new_v = work.eval(&[&to[..k], &[u], &to[k..]]);
        if !improves(
            w.route_score(&new_u) + w.route_score(&new_v),
            w.route_score(&old_u) + w.route_score(&old_v),
        ) {
            return false;
        }
        let before = self.snapshot(work);
        let mut from = from.clone();
        from.remove(pu);
        let mut to = to.clone();
        to.insert(k, u);
        work.set_route(ru, from, new_u);
        work.set_route(rv, to, new_v);
        work.cleanup();
        self.record(MoveKind::Relocate, before, work);
        true
    }

    fn try_relocate_new_route(&mut self, work: &mut Work, u: usize) -> bool {
        let epoch = self.epoch;
        let ru = work.route_of[u];
        if work.routes[ru].len() < 2 {
            return false;
        }
        let pu = work.pos_of[u];
        let (p, s) = (work.pred(u), work.succ(u));
        let delta = epoch.travel(p, s) - epoch.travel(p, u) - epoch.travel(u, s)
            + epoch.travel(DEPOT, u)
            + epoch.travel(u, DEPOT);
        let w = work.weights;
        let old = work.costs[ru];
        if !lower_bound_admits(&w, &[old], delta) {
            return false;
        }
        let route = &work.routes[ru];
        let rest = work.eval(&[&route[..pu], &route[pu + 1..]]);
        let alone = work.eval(&[&[u]]);
        if !improves(w.route_score(&rest) + w.route_score(&alone), w.route_score(&old)) {
            return false;
        }
        let before = self.snapshot(work);
        let mut nodes = route.clone();
        nodes.remove(pu);
        work.set_route(ru, nodes, rest);
        work.push_route(vec![u], alone);
        self.record(MoveKind::Relocate, before, work);
        true
    }

    fn try_swap(&mut self, work: &mut Work, u: usize, v: usize) -> bool {
        let epoch = self.epoch;
        let (ru, pu) = (work.route_of[u], work.pos_of[u]);
        let (rv, pv) = (work.route_of[v], work.pos_of[v]);
        let w = work.weights;
        if ru == rv {
            let old = work.costs[ru];
            let mut nodes = work.routes[ru].clone();
            nodes.swap(pu, pv);
            let delta = route_distance(epoch, &nodes) - old.distance;
            if !lower_bound_admits(&w, &[old], delta) {
                return false;
            }
            let new = work.eval(&[&nodes]);
            if !improves(w.route_score(&new), w.route_score(&old)) {
                return false;
            }
            let before = self.snapshot(work);
            work.set_route(ru, nodes, new);
            self.record(MoveKind::Swap, before, work);
            return true;
        }
        let (pu_, su) = (work.pred(u), work.succ(u));
        let (pv_, sv) = (work.pred(v), work.succ(v));
        let delta = epoch.travel(pu_, v) + epoch.travel(v, su) - epoch.travel(pu_, u) - epoch.travel(u, su)
            + epoch.travel(pv_, u)
            + epoch.travel(u, sv)
            - epoch.travel(pv_, v)
            - epoch.travel(v, sv);
        let (old_u, old_v) = (work.costs[ru], work.costs[rv]);
        if !lower_bound_admits(&w, &[old_u, old_v], delta) {
            return false;
        }
        let a = &work.routes[ru];
        let b = &work.routes[rv];
        let new_u = work.eval(&[&a[..pu], &[v], &a[pu + 1..]]);
        let new_v = work.eval(&[&b[..pv], &[u], &b[pv + 1..]]);
        if !improves(
            w.route_score(&new_u) + w.route_score(&new_v),
            w.route_score(&old_u) + w.route_score(&old_v),
        ) {
            return false;
        }
        let before = self.snapshot(work);
        let mut a = a.clone();
        let mut b = b.clone();
        a[pu] = v;
        b[pv] = u;
        work.set_route(ru, a, new_u);
        work.set_route(rv, b, new_v);
        self.record(MoveKind::Swap, before, work);
        true
    }

    fn try_two_opt(&mut self, work: &mut Work, u: usize, v: usize) -> bool {
        let r = work.route_of[u];
        let (i, j) = {
            let (a, b) = (work.pos_of[u], work.pos_of[v]);
            (a.min(b), a.max(b))
        };
        let w = work.weights;
        let old = work.costs[r];
        let mut nodes = work.routes[r].clone();
        nodes[i..=j].reverse();
        let delta = route_distance(self.epoch, &nodes) - old.distance;
        if !lower_bound_admits(&w, &[old], delta) {
            return false;
        }
        let new = work.eval(&[&nodes]);
        if !improves(w.route_score(&new), w.route_score(&old)) {
            return false;
        }
        let before = self.snapshot(work);
        work.set_route(r, nodes, new);
        self.record(MoveKind::TwoOpt, before, work);
        true
    }

    /// Exchanges the tail after `u` with the tail starting at `v`, creating
    /// the arc `u -> v`.
    fn try_two_opt_star(&mut self, work: &mut Work, u: usize, v: usize) -> bool {
        let epoch = self.epoch;
        let (ru, pu) = (work.route_of[u], work.pos_of[u]);
        let (rv, pv) = (work.route_of[v], work.pos_of[v]);
        let su = work.succ(u);
        let pv_ = work.pred(v);
        let delta = epoch.travel(u, v) + epoch.travel(pv_, su) - epoch.travel(u, su) - epoch.travel(pv_, v);
        let w = work.weights;
        let (old_u, old_v) = (work.costs[ru], work.costs[rv]);
        if !lower_bound_admits(&w, &[old_u, old_v], delta) {
            return false;
        }
        let a = &work.routes[ru];
        let b = &work.routes[rv];
        let new_u = work.eval(&[&a[..=pu], &b[pv..]]);
        let new_v = work.eval(&[&b[..pv], &a[pu + 1..]]);
        if !improves(
            w.route_score(&new_u) + w.route_score(&new_v),
            w.route_score(&old_u) + w.route_score(&old_v),
        ) {
            return false;
        }
        let before = self.snapshot(work);
        let mut na = a[..=pu].to_vec();
        na.extend_from_slice(&b[pv..]);
        let mut nb = b[..pv].to_vec();
        nb.extend_from_slice(&a[pu + 1..]);
        work.set_route(ru, na, new_u);
        work.set_route(rv, nb, new_v);
        work.cleanup();
        self.record(MoveKind::TwoOptStar, before, work);
        true
    }
}

/// Penalties are nonnegative, so the new score of the touched routes is at
/// least their old distance plus `delta`. Returns false when that bound
/// already rules out an improvement.
#[inline]
fn lower_bound_admits(w: &PenaltyWeights, old: &[RouteCost], delta: i64) -> bool {
    let old_score: f64 = old.iter().map(|c| w.route_score(c)).sum();
    let old_dist: i64 = old.iter().map(|c| c.distance).sum();
    improves(w.dist * (old_dist + delta) as f64, old_score)
}

fn route_distance(epoch: &EpochInstance, nodes: &[usize]) -> i64 {
    let mut prev = DEPOT;
    let mut d = 0;
    for &n in nodes {
        d += epoch.travel(prev, n);
        prev = n;
    }
    if prev == DEPOT {
        0
    } else {
        d + epoch.travel(prev, DEPOT)
    }
}

/// Mutable solution state of one local-search call.
struct Work<'e> {
    epoch: &'e EpochInstance,
    weights: PenaltyWeights,
    routes: Vec<Vec<usize>>,
    costs: Vec<RouteCost>,
    route_of: Vec<usize>,
    pos_of: Vec<usize>,
}

impl<'e> Work<'e> {
    fn new(epoch: &'e EpochInstance, weights: PenaltyWeights, plan: &RoutePlan) -> Self {
        let routes: Vec<Vec<usize>> = plan.routes.iter().filter(|r| !r.is_empty()).cloned().collect();
        let costs = routes
            .iter()
            .map(|r| evaluate_nodes(r.iter().copied(), epoch))
            .collect();
        let mut work = Work {
            epoch,
            weights,
            routes,
            costs,
            route_of: vec![NONE; epoch.node_count()],
            pos_of: vec![NONE; epoch.node_count()],
        };
        work.reindex_all();
        work
    }

    fn eval(&self, parts: &[&[usize]]) -> RouteCost {
        evaluate_nodes(parts.iter().flat_map(|p| p.iter().copied()), self.epoch)
    }

    fn pred(&self, u: usize) -> usize {
        let p = self.pos_of[u];
        if p == 0 {
            DEPOT
        } else {
            self.routes[self.route_of[u]][p - 1]
        }
    }

    fn succ(&self, u: usize) -> usize {
        let route = &self.routes[self.route_of[u]];
        route.get(self.pos_of[u] + 1).copied().unwrap_or(DEPOT)
    }

    fn set_route(&mut self, r: usize, nodes: Vec<usize>, cost: RouteCost) {
        for (i, &n) in nodes.iter().enumerate() {
            self.route_of[n] = r;
            self.pos_of[n] = i;
        }
        self.routes[r] = nodes;
        self.costs[r] = cost;
    }

    fn push_route(&mut self, nodes: Vec<usize>, cost: RouteCost) {
        self.routes.push(Vec::new());
        self.costs.push(RouteCost::default());
        self.set_route(self.routes.len() - 1, nodes, cost);
    }

    /// Drops empty routes and refreshes the node index.
    fn cleanup(&mut self) {
        if self.routes.iter().all(|r| !r.is_empty()) {
            return;
        }
        let mut keep = self.routes.iter().map(|r| !r.is_empty());
        self.costs.retain(|_| keep.next().unwrap());
        self.routes.retain(|r| !r.is_empty());
        self.reindex_all();
    }

    fn reindex_all(&mut self) {
        for (r, route) in self.routes.iter().enumerate() {
            for (i, &n) in route.iter().enumerate() {
                self.route_of[n] = r;
                self.pos_of[n] = i;
            }
        }
    }

    fn breakdown(&self) -> CostBreakdown {
        let mut total = CostBreakdown::default();
        for (route, cost) in self.routes.iter().zip(&self.costs) {
            total.add_route(cost);
            for &c in route {
                total.s_late += self.epoch.tw_end(c);
                total.n += 1;
            }
        }
        total
    }

    fn plan(&self) -> RoutePlan {
        RoutePlan::new(self.routes.iter().filter(|r| !r.is_empty()).cloned().collect())
    }
}
