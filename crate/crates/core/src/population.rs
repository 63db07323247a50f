//! Individuals, the two subpopulations, diversity-aware ranking, survivor
//! selection and penalty adaptation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evaluate::{adapt_weight, CostBreakdown, Objective, PenaltyWeights};
use crate::local_search::LocalSearch;
use crate::model::{EpochInstance, GiantTour, RoutePlan};
use crate::split::split;

/// Probabilities with which optional customers are dropped from each random
/// ordering when seeding the population.
pub const REMOVAL_PROBABILITIES: [f64; 4] = [0.0, 0.1, 0.5, 1.0];

#[derive(Debug, Clone)]
pub struct Individual {
    pub tour: GiantTour,
    pub plan: RoutePlan,
    pub cost: CostBreakdown,
    pub fitness: f64,
    members: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl Individual {
    /// Wraps a decoded plan. The giant tour is the concatenation of its
    /// routes.
    pub fn from_plan(plan: RoutePlan, epoch: &EpochInstance, weights: &PenaltyWeights, objective: Objective) -> Self {
        let tour = plan.flatten();
        let cost = CostBreakdown::of_plan(&plan, epoch);
        let fitness = objective.evaluate(&cost, weights, epoch);
        let mut members = tour.0.clone();
        members.sort_unstable();
        let mut pairs: Vec<(usize, usize)> = tour.0.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
        pairs.sort_unstable();
        Individual {
            tour,
            plan,
            cost,
            fitness,
            members,
            pairs,
        }
    }

    /// Decodes a giant tour with [`split`].
    pub fn from_tour(tour: GiantTour, epoch: &EpochInstance, weights: &PenaltyWeights, objective: Objective) -> Self {
        let plan = split(&tour, epoch, weights);
        Individual::from_plan(plan, epoch, weights, objective)
    }

    pub fn is_feasible(&self) -> bool {
        self.cost.is_feasible()
    }

    /// Sorted customer set.
    pub fn customers(&self) -> &[usize] {
        &self.members
    }
}

fn sorted_symmetric_difference<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut diff) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                diff += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                diff += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    diff + (a.len() - i) + (b.len() - j)
}

/// Broken-pairs distance between two variable-size giant tours.
///
/// Counts undirected successor pairs present in only one tour plus customers
/// present in only one tour, divided by twice the size of the union of the
/// customer sets. Lies in `[0, 1)`; reversed tours are at distance 0.
pub fn broken_pairs_distance(a: &Individual, b: &Individual) -> f64 {
    let only_one = sorted_symmetric_difference(&a.members, &b.members);
    let union = (a.members.len() + b.members.len() + only_one) / 2;
    if union == 0 {
        return 0.0;
    }
    let broken = sorted_symmetric_difference(&a.pairs, &b.pairs) + only_one;
    broken as f64 / (2 * union) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationParams {
    /// Minimum subpopulation size after survivor selection.
    pub mu: usize,
    /// Generation size; selection triggers above `mu + lambda`.
    pub lambda: usize,
    pub elite: usize,
    pub n_closest: usize,
    pub target_feasible: f64,
    /// Iterations between penalty adaptations.
    pub adapt_period: usize,
}

impl Default for PopulationParams {
    fn default() -> Self {
        PopulationParams {
            mu: 25,
            lambda: 40,
            elite: 4,
            n_closest: 5,
            target_feasible: 0.2,
            adapt_period: 100,
        }
    }
}

#[derive(Debug, Clone)]
struct Member {
    ind: Individual,
    id: u64,
    biased: f64,
    /// (distance, id) to every other member, ascending.
    proximity: Vec<(f64, u64)>,
}

#[derive(Debug, Clone, Default)]
struct SubPopulation {
    members: Vec<Member>,
}

impl SubPopulation {
    fn add(&mut self, ind: Individual, id: u64) {
        let mut proximity = Vec::with_capacity(self.members.len());
        for m in &mut self.members {
            let d = broken_pairs_distance(&ind, &m.ind);
            let at = m.proximity.partition_point(|&(x, _)| x <= d);
            m.proximity.insert(at, (d, id));
            proximity.push((d, m.id));
        }
        proximity.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.members.push(Member {
            ind,
            id,
            biased: 0.0,
            proximity,
        });
    }

    fn remove(&mut self, index: usize) -> Individual {
        let gone = self.members.remove(index);
        for m in &mut self.members {
            m.proximity.retain(|&(_, id)| id != gone.id);
        }
        gone.ind
    }

    fn average_proximity(&self, index: usize, n_closest: usize) -> f64 {
        let list = &self.members[index].proximity;
        let k = n_closest.min(list.len());
        if k == 0 {
            return 0.0;
        }
        list[..k].iter().map(|&(d, _)| d).sum::<f64>() / k as f64
    }

    fn update_biased(&mut self, params: &PopulationParams) {
        let size = self.members.len();
        if size == 0 {
            return;
        }
        if size == 1 {
            self.members[0].biased = 0.0;
            return;
        }
        let scale = (size - 1) as f64;
        let mut by_cost: Vec<usize> = (0..size).collect();
        by_cost.sort_by(|&a, &b| self.members[a].ind.fitness.total_cmp(&self.members[b].ind.fitness));
        let diversity: Vec<f64> = (0..size).map(|i| self.average_proximity(i, params.n_closest)).collect();
        let mut by_div: Vec<usize> = (0..size).collect();
        by_div.sort_by(|&a, &b| diversity[b].total_cmp(&diversity[a]));
        let mut div_rank = vec![0.0; size];
        for (rank, &i) in by_div.iter().enumerate() {
            div_rank[i] = rank as f64 / scale;
        }
        let div_weight = (1.0 - params.elite as f64 / size as f64).max(0.0);
        for (rank, &i) in by_cost.iter().enumerate() {
            self.members[i].biased = rank as f64 / scale + div_weight * div_rank[i];
        }
    }

    /// Index of the individual to discard: the worst biased fitness among
    /// exact giant-tour duplicates, or the worst overall when there are none.
    fn worst(&self) -> usize {
        let is_clone = |i: usize| {
            let tour = &self.members[i].ind.tour;
            self.members
                .iter()
                .enumerate()
                .any(|(j, m)| j != i && m.ind.tour == *tour)
        };
        let worst_of = |candidates: &mut dyn Iterator<Item = usize>| {
            candidates.fold(None, |acc: Option<usize>, i| match acc {
                Some(j) if self.members[j].biased >= self.members[i].biased => Some(j),
                _ => Some(i),
            })
        };
        let mut clones = (0..self.members.len()).filter(|&i| is_clone(i));
        worst_of(&mut clones)
            .or_else(|| worst_of(&mut (0..self.members.len())))
            .expect("survivor selection on an empty subpopulation")
    }
}

/// Feasible and infeasible subpopulations plus the adaptive penalty state.
#[derive(Debug, Clone)]
pub struct Population {
    params: PopulationParams,
    weights: PenaltyWeights,
    objective: Objective,
    epoch_index: usize,
    epoch_count: usize,
    feasible: SubPopulation,
    infeasible: SubPopulation,
    next_id: u64,
    cap_history: Vec<bool>,
    time_history: Vec<bool>,
}

impl Population {
    pub fn new(params: PopulationParams, weights: PenaltyWeights, objective: Objective, epoch: &EpochInstance) -> Self {
        Population {
            params,
            weights,
            objective,
            epoch_index: epoch.epoch_index,
            epoch_count: epoch.epoch_count,
            feasible: SubPopulation::default(),
            infeasible: SubPopulation::default(),
            next_id: 0,
            cap_history: Vec::new(),
            time_history: Vec::new(),
        }
    }

    pub fn params(&self) -> &PopulationParams {
        &self.params
    }

    pub fn weights(&self) -> &PenaltyWeights {
        &self.weights
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn len(&self) -> usize {
        self.feasible.members.len() + self.infeasible.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feasible(&self) -> impl Iterator<Item = &Individual> {
        self.feasible.members.iter().map(|m| &m.ind)
    }

    pub fn infeasible(&self) -> impl Iterator<Item = &Individual> {
        self.infeasible.members.iter().map(|m| &m.ind)
    }

    /// Biased fitness of the feasible and infeasible members, in storage
    /// order.
    pub fn biased_fitness(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.feasible.members.iter().map(|m| m.biased).collect(),
            self.infeasible.members.iter().map(|m| m.biased).collect(),
        )
    }

    pub fn best_feasible(&self) -> Option<&Individual> {
        self.feasible
            .members
            .iter()
            .map(|m| &m.ind)
            .fold(None, |best: Option<&Individual>, ind| match best {
                Some(b) if b.fitness <= ind.fitness => Some(b),
                _ => Some(ind),
            })
    }

    /// Fitness of a cost breakdown under the current weights.
    pub fn score(&self, cost: &CostBreakdown) -> f64 {
        self.objective
            .evaluate_at(cost, &self.weights, self.epoch_index, self.epoch_count)
    }

    /// Adds an individual to the subpopulation matching its feasibility and
    /// runs survivor selection if that subpopulation overflows.
    pub fn insert(&mut self, mut ind: Individual) {
        ind.fitness = self.score(&ind.cost);
        let id = self.next_id;
        self.next_id += 1;
        let params = self.params;
        let sub = if ind.is_feasible() {
            &mut self.feasible
        } else {
            &mut self.infeasible
        };
        sub.add(ind, id);
        if sub.members.len() > params.mu + params.lambda {
            while sub.members.len() > params.mu {
                sub.update_biased(&params);
                let worst = sub.worst();
                sub.remove(worst);
            }
        }
        sub.update_biased(&params);
    }

    /// Two binary tournaments over the union of both subpopulations. The
    /// second parent differs from the first whenever the union holds at
    /// least two distinct giant tours.
    pub fn select_parents<R: Rng + ?Sized>(&self, rng: &mut R) -> (&Individual, &Individual) {
        let union: Vec<&Member> = self.feasible.members.iter().chain(&self.infeasible.members).collect();
        assert!(!union.is_empty(), "parent selection on an empty population");
        let tournament = |rng: &mut R| -> usize {
            let a = rng.gen_range(0..union.len());
            let b = rng.gen_range(0..union.len());
            let (ba, bb) = (union[a].biased, union[b].biased);
            if ba < bb {
                a
            } else if bb < ba {
                b
            } else if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        };
        let first = tournament(rng);
        let tour = &union[first].ind.tour;
        let distinct: Vec<usize> = (0..union.len()).filter(|&i| union[i].ind.tour != *tour).collect();
        if distinct.is_empty() {
            return (&union[first].ind, &union[first].ind);
        }
        for _ in 0..100 {
            let second = tournament(rng);
            if union[second].ind.tour != *tour {
                return (&union[first].ind, &union[second].ind);
            }
        }
        let second = *distinct.choose(rng).unwrap();
        (&union[first].ind, &union[second].ind)
    }

    /// Notes the feasibility of a freshly produced individual for the next
    /// penalty adaptation.
    pub fn record_new(&mut self, ind: &Individual) {
        self.record_feasibility(ind.cost.s_cap == 0, ind.cost.s_time == 0);
    }

    pub fn record_feasibility(&mut self, capacity_ok: bool, time_ok: bool) {
        self.cap_history.push(capacity_ok);
        self.time_history.push(time_ok);
    }

    /// Adjusts `cap` and `time` from the feasibility fractions recorded
    /// since the previous call and rescores every stored individual.
    pub fn adapt_penalties(&mut self) {
        let fraction = |h: &[bool]| h.iter().filter(|&&ok| ok).count() as f64 / h.len() as f64;
        if self.cap_history.is_empty() {
            return;
        }
        let target = self.params.target_feasible;
        let mut weights = self.weights;
        weights.cap = adapt_weight(weights.cap, fraction(&self.cap_history), target);
        weights.time = adapt_weight(weights.time, fraction(&self.time_history), target);
        self.cap_history.clear();
        self.time_history.clear();
        self.set_weights(weights);
    }

    pub fn set_weights(&mut self, weights: PenaltyWeights) {
        self.weights = weights;
        let (obj, t, big_t) = (self.objective, self.epoch_index, self.epoch_count);
        for sub in [&mut self.feasible, &mut self.infeasible] {
            for m in &mut sub.members {
                m.ind.fitness = obj.evaluate_at(&m.ind.cost, &weights, t, big_t);
            }
            sub.update_biased(&self.params);
        }
    }

    /// Empties both subpopulations; penalty weights are kept.
    pub fn clear(&mut self) {
        self.feasible.members.clear();
        self.infeasible.members.clear();
    }
}

/// Giant tours seeded from one random ordering: for each removal
/// probability, every optional customer is dropped independently with that
/// probability. Must-go customers are always kept. Identical tours are
/// emitted once.
pub fn initial_tours<R: Rng + ?Sized>(epoch: &EpochInstance, rng: &mut R) -> Vec<GiantTour> {
    let mut order: Vec<usize> = epoch.customers().collect();
    order.shuffle(rng);
    let mut tours: Vec<GiantTour> = Vec::with_capacity(REMOVAL_PROBABILITIES.len());
    for &p in &REMOVAL_PROBABILITIES {
        let tour: GiantTour = order
            .iter()
            .copied()
            .filter(|&c| epoch.is_must_go(c) || !rng.gen_bool(p))
            .collect::<Vec<_>>()
            .into();
        if !tours.contains(&tour) {
            tours.push(tour);
        }
    }
    tours
}

/// Seeds `pop` with `orderings` random orderings, each expanded by
/// [`initial_tours`], decoded, improved by local search and inserted.
/// Stops early once `deadline` passes. Returns the inserted individuals'
/// count.
pub fn initialize<R: Rng + ?Sized>(
    pop: &mut Population,
    epoch: &EpochInstance,
    ls: &mut LocalSearch,
    orderings: usize,
    rng: &mut R,
    deadline: Option<Instant>,
) -> usize {
    let mut inserted = 0;
    for _ in 0..orderings {
        for tour in initial_tours(epoch, rng) {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return inserted;
            }
            let weights = *pop.weights();
            let decoded = split(&tour, epoch, &weights);
            let improved = ls.improve(&decoded, &weights, rng);
            let ind = Individual::from_plan(improved, epoch, &weights, pop.objective());
            pop.record_new(&ind);
            pop.insert(ind);
            inserted += 1;
        }
    }
    inserted
}
