//! Domain types: the static instance, per-epoch requests, giant tours and
//! decoded route plans.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Node index of the depot in every instance and epoch.
pub const DEPOT: usize = 0;

/// Static world data. Node 0 is the depot, nodes `1..=N` are customer
/// profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub name: String,
    pub coords: Vec<(f64, f64)>,
    /// Travel cost and travel duration, which are identical.
    pub travel: Vec<Vec<i64>>,
    pub service_time: Vec<i64>,
    pub tw_start: Vec<i64>,
    pub tw_end: Vec<i64>,
    pub demand: Vec<i64>,
    pub capacity: i64,
}

/// Rounded Euclidean distance, the integer metric used for every generated
/// or parsed instance.
pub fn rounded_euclidean(a: (f64, f64), b: (f64, f64)) -> i64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt().round() as i64
}

impl ProblemInstance {
    /// Builds an instance whose travel matrix is the rounded Euclidean
    /// distance between `coords`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_coords(
        name: impl Into<String>,
        coords: Vec<(f64, f64)>,
        demand: Vec<i64>,
        tw_start: Vec<i64>,
        tw_end: Vec<i64>,
        service_time: Vec<i64>,
        capacity: i64,
    ) -> Result<Self, ModelError> {
        let travel = coords
            .iter()
            .map(|&a| coords.iter().map(|&b| rounded_euclidean(a, b)).collect())
            .collect();
        let instance = ProblemInstance {
            name: name.into(),
            coords,
            travel,
            service_time,
            tw_start,
            tw_end,
            demand,
            capacity,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Checks the structural invariants of the instance.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.coords.len();
        if n < 2 {
            return Err(ModelError::NoCustomers);
        }
        let lens = [
            ("travel", self.travel.len()),
            ("service_time", self.service_time.len()),
            ("tw_start", self.tw_start.len()),
            ("tw_end", self.tw_end.len()),
            ("demand", self.demand.len()),
        ];
        for (field, len) in lens {
            if len != n {
                return Err(ModelError::LengthMismatch {
                    field,
                    expected: n,
                    found: len,
                });
            }
        }
        if self.capacity <= 0 {
            return Err(ModelError::NonPositiveCapacity(self.capacity));
        }
        for (i, row) in self.travel.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::LengthMismatch {
                    field: "travel row",
                    expected: n,
                    found: row.len(),
                });
            }
            if row[i] != 0 {
                return Err(ModelError::NonZeroDiagonal(i));
            }
            if let Some(j) = row.iter().position(|&c| c < 0) {
                return Err(ModelError::NegativeTravel(i, j));
            }
        }
        for i in 0..n {
            if self.tw_start[i] > self.tw_end[i] {
                return Err(ModelError::InvertedWindow(i));
            }
            if self.service_time[i] < 0 {
                return Err(ModelError::NegativeService(i));
            }
        }
        if self.demand[DEPOT] != 0 || self.service_time[DEPOT] != 0 {
            return Err(ModelError::DepotNotNeutral);
        }
        for i in 1..n {
            let d = self.demand[i];
            if d <= 0 || d > self.capacity {
                return Err(ModelError::DemandOutOfRange {
                    node: i,
                    demand: d,
                    capacity: self.capacity,
                });
            }
        }
        Ok(())
    }

    /// Number of nodes including the depot.
    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn customer_count(&self) -> usize {
        self.coords.len() - 1
    }
}

/// A customer request as seen by the dynamic environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    /// Index of the customer profile in the base instance.
    pub profile: usize,
    pub tw_start: i64,
    pub tw_end: i64,
    pub demand: i64,
    pub service_time: i64,
    pub must_go: bool,
    pub first_epoch: usize,
}

/// The subproblem visible at one epoch.
///
/// Node `0` is the depot and node `k` (for `k >= 1`) is `requests[k - 1]`.
/// Giant tours and route plans handed to and from the solver use these local
/// node indices.
#[derive(Debug, Clone)]
pub struct EpochInstance {
    pub epoch_index: usize,
    pub epoch_count: usize,
    pub departure_time: i64,
    pub requests: Vec<Request>,
    pub capacity: i64,
    size: usize,
    travel: Vec<i64>,
    tw_start: Vec<i64>,
    tw_end: Vec<i64>,
    service: Vec<i64>,
    demand: Vec<i64>,
    must_go: Vec<bool>,
}

impl EpochInstance {
    pub fn new(
        base: &ProblemInstance,
        epoch_index: usize,
        epoch_count: usize,
        departure_time: i64,
        requests: Vec<Request>,
    ) -> Result<Self, ModelError> {
        if epoch_count == 0 || epoch_index == 0 || epoch_index > epoch_count {
            return Err(ModelError::EpochOutOfRange {
                index: epoch_index,
                count: epoch_count,
            });
        }
        let mut profiles = Vec::with_capacity(requests.len() + 1);
        profiles.push(DEPOT);
        let mut seen = HashSet::with_capacity(requests.len());
        for r in &requests {
            if r.profile == DEPOT || r.profile >= base.node_count() {
                return Err(ModelError::UnknownProfile(r.profile));
            }
            if r.tw_end < r.tw_start {
                return Err(ModelError::InvertedRequestWindow(r.id));
            }
            if r.demand <= 0 || r.demand > base.capacity {
                return Err(ModelError::DemandOutOfRange {
                    node: r.profile,
                    demand: r.demand,
                    capacity: base.capacity,
                });
            }
            if !seen.insert(r.id) {
                return Err(ModelError::DuplicateRequest(r.id));
            }
            profiles.push(r.profile);
        }
        let size = profiles.len();
        let mut travel = Vec::with_capacity(size * size);
        for &a in &profiles {
            for &b in &profiles {
                travel.push(base.travel[a][b]);
            }
        }
        let mut tw_start = vec![departure_time];
        let mut tw_end = vec![i64::MAX / 4];
        let mut service = vec![0];
        let mut demand = vec![0];
        let mut must_go = vec![false];
        for r in &requests {
            tw_start.push(r.tw_start);
            tw_end.push(r.tw_end);
            service.push(r.service_time);
            demand.push(r.demand);
            must_go.push(r.must_go);
        }
        Ok(EpochInstance {
            epoch_index,
            epoch_count,
            departure_time,
            requests,
            capacity: base.capacity,
            size,
            travel,
            tw_start,
            tw_end,
            service,
            demand,
            must_go,
        })
    }

    /// Number of nodes including the depot.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn request_count(&self) -> usize {
        self.size - 1
    }

    #[inline]
    pub fn travel(&self, from: usize, to: usize) -> i64 {
        self.travel[from * self.size + to]
    }

    #[inline]
    pub fn tw_start(&self, node: usize) -> i64 {
        self.tw_start[node]
    }

    #[inline]
    pub fn tw_end(&self, node: usize) -> i64 {
        self.tw_end[node]
    }

    #[inline]
    pub fn service_time(&self, node: usize) -> i64 {
        self.service[node]
    }

    #[inline]
    pub fn demand(&self, node: usize) -> i64 {
        self.demand[node]
    }

    #[inline]
    pub fn is_must_go(&self, node: usize) -> bool {
        self.must_go[node]
    }

    pub fn request(&self, node: usize) -> &Request {
        &self.requests[node - 1]
    }

    /// Local node of the request with the given id.
    pub fn node_of(&self, request_id: u64) -> Option<usize> {
        self.requests.iter().position(|r| r.id == request_id).map(|i| i + 1)
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.request_count()
    }

    pub fn must_go_nodes(&self) -> Vec<usize> {
        self.customers().filter(|&c| self.must_go[c]).collect()
    }

    pub fn optional_nodes(&self) -> Vec<usize> {
        self.customers().filter(|&c| !self.must_go[c]).collect()
    }

    /// Largest travel cost in the epoch matrix.
    pub fn max_travel(&self) -> i64 {
        self.travel.iter().copied().max().unwrap_or(0)
    }

    pub fn max_demand(&self) -> i64 {
        self.demand.iter().copied().max().unwrap_or(0)
    }

    /// Sub-epoch on the given nodes, with every kept request marked must-go.
    /// Returns the new epoch and, for each of its nodes, the node it came
    /// from in `self`.
    pub fn restrict_fixed(&self, nodes: &[usize]) -> (EpochInstance, Vec<usize>) {
        let size = nodes.len() + 1;
        let mut mapping = Vec::with_capacity(size);
        mapping.push(DEPOT);
        mapping.extend_from_slice(nodes);
        let mut travel = Vec::with_capacity(size * size);
        for &a in &mapping {
            for &b in &mapping {
                travel.push(self.travel(a, b));
            }
        }
        let pick = |v: &Vec<i64>| mapping.iter().map(|&n| v[n]).collect::<Vec<_>>();
        let requests: Vec<Request> = nodes
            .iter()
            .map(|&n| Request {
                must_go: true,
                ..self.request(n).clone()
            })
            .collect();
        let mut must_go = vec![true; size];
        must_go[DEPOT] = false;
        let sub = EpochInstance {
            epoch_index: self.epoch_index,
            epoch_count: self.epoch_count,
            departure_time: self.departure_time,
            requests,
            capacity: self.capacity,
            size,
            tw_start: pick(&self.tw_start),
            tw_end: pick(&self.tw_end),
            service: pick(&self.service),
            demand: pick(&self.demand),
            must_go,
            travel,
        };
        (sub, mapping)
    }
}

/// A depot-free sequence of distinct customer nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GiantTour(pub Vec<usize>);

impl GiantTour {
    pub fn new(nodes: Vec<usize>) -> Self {
        GiantTour(nodes)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.0.len());
        !self.0.iter().all(|c| seen.insert(*c))
    }
}

impl From<Vec<usize>> for GiantTour {
    fn from(v: Vec<usize>) -> Self {
        GiantTour(v)
    }
}

/// Routes leaving and returning to the depot; the depot itself is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoutePlan {
    pub routes: Vec<Vec<usize>>,
}

impl RoutePlan {
    pub fn new(routes: Vec<Vec<usize>>) -> Self {
        RoutePlan { routes }
    }

    /// One dedicated out-and-back route per node.
    pub fn singletons(nodes: &[usize]) -> Self {
        RoutePlan {
            routes: nodes.iter().map(|&n| vec![n]).collect(),
        }
    }

    pub fn flatten(&self) -> GiantTour {
        GiantTour(self.routes.iter().flatten().copied().collect())
    }

    pub fn customer_count(&self) -> usize {
        self.routes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.routes.iter().flatten().copied()
    }
}

/// A reason a plan cannot be committed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    UnknownNode { node: usize },
    EmptyRoute { route: usize },
    Duplicate { node: usize },
    MissingMustGo { node: usize },
    CapacityExcess { route: usize, excess: i64 },
    LateArrival { route: usize, node: usize, lateness: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownNode { node } => write!(f, "node {node} is not in the epoch"),
            Violation::EmptyRoute { route } => write!(f, "route {route} is empty"),
            Violation::Duplicate { node } => write!(f, "node {node} is visited more than once"),
            Violation::MissingMustGo { node } => {
                write!(f, "must-go node {node} is not dispatched")
            }
            Violation::CapacityExcess { route, excess } => {
                write!(f, "route {route} exceeds capacity by {excess}")
            }
            Violation::LateArrival { route, node, lateness } => {
                write!(f, "route {route} reaches node {node} {lateness} after its window")
            }
        }
    }
}

/// Result of [`validate_plan`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_hard_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "feasible");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Hard-feasibility check of a plan against an epoch: capacity, time windows
/// on the earliest-arrival schedule (waiting is free), duplicates and must-go
/// coverage.
pub fn validate_plan(plan: &RoutePlan, epoch: &EpochInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = vec![false; epoch.node_count()];
    for (r, route) in plan.routes.iter().enumerate() {
        if route.is_empty() {
            violations.push(Violation::EmptyRoute { route: r });
            continue;
        }
        if let Some(&node) = route.iter().find(|&&n| n == DEPOT || n >= epoch.node_count()) {
            violations.push(Violation::UnknownNode { node });
            continue;
        }
        let mut load = 0;
        let mut clock = epoch.departure_time;
        let mut prev = DEPOT;
        for &node in route {
            if std::mem::replace(&mut seen[node], true) {
                violations.push(Violation::Duplicate { node });
            }
            load += epoch.demand(node);
            clock = (clock + epoch.service_time(prev) + epoch.travel(prev, node)).max(epoch.tw_start(node));
            if clock > epoch.tw_end(node) {
                violations.push(Violation::LateArrival {
                    route: r,
                    node,
                    lateness: clock - epoch.tw_end(node),
                });
            }
            prev = node;
        }
        if load > epoch.capacity {
            violations.push(Violation::CapacityExcess {
                route: r,
                excess: load - epoch.capacity,
            });
        }
    }
    for node in epoch.customers() {
        if epoch.is_must_go(node) && !seen[node] {
            violations.push(Violation::MissingMustGo { node });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Depot at the origin plus customers on the x axis.
    pub(crate) fn line_instance(xs: &[f64], demand: i64, capacity: i64) -> ProblemInstance {
        let mut coords = vec![(0.0, 0.0)];
        coords.extend(xs.iter().map(|&x| (x, 0.0)));
        let n = coords.len();
        let mut dem = vec![demand; n];
        dem[0] = 0;
        let mut service = vec![0; n];
        service[0] = 0;
        ProblemInstance::from_coords("line", coords, dem, vec![0; n], vec![1_000_000; n], service, capacity).unwrap()
    }

    pub(crate) fn request(id: u64, profile: usize, tw: (i64, i64), demand: i64, must_go: bool) -> Request {
        Request {
            id,
            profile,
            tw_start: tw.0,
            tw_end: tw.1,
            demand,
            service_time: 0,
            must_go,
            first_epoch: 1,
        }
    }

    #[test]
    fn empty_plan_without_must_go_is_feasible() {
        let base = line_instance(&[10.0, 20.0], 1, 10);
        let epoch = EpochInstance::new(&base, 1, 2, 0, vec![request(1, 1, (0, 100), 1, false)]).unwrap();
        let report = validate_plan(&RoutePlan::default(), &epoch);
        assert!(report.is_hard_feasible());
        assert!(report.violations.is_empty());
    }

    #[test]
    fn singleton_route_is_feasible() {
        let base = line_instance(&[10.0, 20.0], 4, 10);
        let epoch = EpochInstance::new(&base, 1, 1, 5, vec![request(7, 2, (0, 25), 4, true)]).unwrap();
        // departure 5 + travel 20 = 25 <= tw_end 25
        let report = validate_plan(&RoutePlan::singletons(&[1]), &epoch);
        assert!(report.is_hard_feasible(), "{report}");
    }

    #[test]
    fn capacity_excess_is_reported() {
        let base = line_instance(&[10.0, 20.0], 5, 10);
        let epoch = EpochInstance::new(
            &base,
            1,
            1,
            0,
            vec![request(1, 1, (0, 1000), 5, true), request(2, 2, (0, 1000), 6, true)],
        )
        .unwrap();
        let report = validate_plan(&RoutePlan::new(vec![vec![1, 2]]), &epoch);
        assert_eq!(
            report.violations,
            vec![Violation::CapacityExcess { route: 0, excess: 1 }]
        );
    }

    #[test]
    fn missing_must_go_and_duplicates_are_reported() {
        let base = line_instance(&[10.0, 20.0], 1, 10);
        let epoch = EpochInstance::new(
            &base,
            1,
            1,
            0,
            vec![request(1, 1, (0, 1000), 1, true), request(2, 2, (0, 1000), 1, true)],
        )
        .unwrap();
        let report = validate_plan(&RoutePlan::new(vec![vec![1], vec![1]]), &epoch);
        assert!(report.violations.contains(&Violation::Duplicate { node: 1 }));
        assert!(report.violations.contains(&Violation::MissingMustGo { node: 2 }));
    }

    #[test]
    fn late_arrival_is_reported() {
        let base = line_instance(&[10.0, 20.0], 1, 10);
        let epoch = EpochInstance::new(
            &base,
            1,
            1,
            0,
            vec![request(1, 2, (0, 1000), 1, true), request(2, 1, (0, 25), 1, true)],
        )
        .unwrap();
        // 0 -> x=20 (t=20) -> x=10 (t=30), window end 25
        let report = validate_plan(&RoutePlan::new(vec![vec![1, 2]]), &epoch);
        assert_eq!(
            report.violations,
            vec![Violation::LateArrival {
                route: 0,
                node: 2,
                lateness: 5
            }]
        );
    }

    #[test]
    fn instance_rejects_oversized_demand() {
        let err = ProblemInstance::from_coords(
            "bad",
            vec![(0.0, 0.0), (1.0, 1.0)],
            vec![0, 11],
            vec![0, 0],
            vec![10, 10],
            vec![0, 0],
            10,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DemandOutOfRange { .. }));
    }

    #[test]
    fn restrict_marks_everything_must_go() {
        let base = line_instance(&[10.0, 20.0, 30.0], 1, 10);
        let epoch = EpochInstance::new(
            &base,
            2,
            3,
            0,
            vec![
                request(1, 1, (0, 1000), 1, false),
                request(2, 2, (0, 1000), 1, true),
                request(3, 3, (0, 1000), 1, false),
            ],
        )
        .unwrap();
        let (sub, map) = epoch.restrict_fixed(&[3, 1]);
        assert_eq!(map, vec![0, 3, 1]);
        assert_eq!(sub.request_count(), 2);
        assert!(sub.is_must_go(1) && sub.is_must_go(2));
        assert_eq!(sub.travel(1, 2), epoch.travel(3, 1));
        assert_eq!(sub.request(1).id, 3);
    }
}
