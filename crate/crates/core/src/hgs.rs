//! The genetic loop: initialization, crossover, local search, repair,
//! survivor selection, penalty adaptation and restarts.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossover::generate_offspring;
use crate::evaluate::{CostBreakdown, Objective, PenaltyWeights};
use crate::local_search::{improves, LocalSearch, LsParams, Neighborhood};
use crate::model::{EpochInstance, RoutePlan};
use crate::population::{initialize, Individual, Population, PopulationParams};

/// Factor applied to the capacity and time penalties during repair.
pub const REPAIR_PENALTY_FACTOR: f64 = 10.0;
pub const REPAIR_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    /// Stalled iterations before the population is rebuilt.
    pub restart_after: usize,
    /// Stalled iterations before the search stops; `0` runs until the
    /// deadline.
    pub stop_after: usize,
    /// Random orderings drawn when (re)building the population; each yields
    /// up to four individuals.
    pub initial_orderings: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            restart_after: 2000,
            stop_after: 5000,
            initial_orderings: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossoverParams {
    pub candidates: usize,
}

impl Default for CrossoverParams {
    fn default() -> Self {
        CrossoverParams { candidates: 2 }
    }
}

/// Every tunable of the solver, grouped as in the TOML configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub population: PopulationParams,
    pub search: SearchParams,
    pub crossover: CrossoverParams,
    pub ls: LsParams,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        let p = &self.population;
        if p.mu == 0 {
            return Err("population.mu must be at least 1".into());
        }
        if p.adapt_period == 0 {
            return Err("population.adapt_period must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&p.target_feasible) {
            return Err("population.target_feasible must lie in [0, 1]".into());
        }
        if self.crossover.candidates == 0 {
            return Err("crossover.candidates must be at least 1".into());
        }
        if self.search.initial_orderings == 0 {
            return Err("search.initial_orderings must be at least 1".into());
        }
        if self.ls.granularity == 0 {
            return Err("ls.granularity must be at least 1".into());
        }
        Ok(())
    }
}

/// Result of one search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Best feasible plan, or the incumbent when nothing better was found.
    pub plan: RoutePlan,
    pub cost: CostBreakdown,
    pub iterations: usize,
    pub restarts: usize,
    /// The returned plan came from the search rather than the incumbent.
    pub improved: bool,
}

struct Best {
    plan: RoutePlan,
    cost: CostBreakdown,
    score: f64,
    from_search: bool,
}

impl Best {
    fn offer(&mut self, ind: &Individual, score: f64) -> bool {
        if ind.is_feasible() && improves(score, self.score) {
            self.plan = ind.plan.clone();
            self.cost = ind.cost;
            self.score = score;
            self.from_search = true;
            return true;
        }
        false
    }
}

/// Runs the genetic loop on `epoch` until `deadline`, the stall limit or
/// `max_iterations`, whichever comes first.
///
/// `incumbent` must be hard-feasible for the epoch; it is returned unchanged
/// if the search finds nothing strictly better. `warm_start` plans are
/// improved and inserted before the random initial population.
#[allow(clippy::too_many_arguments)]
pub fn run<R: Rng + ?Sized>(
    epoch: &EpochInstance,
    objective: Objective,
    config: &SolverConfig,
    incumbent: RoutePlan,
    warm_start: &[RoutePlan],
    deadline: Instant,
    max_iterations: Option<usize>,
    rng: &mut R,
) -> SearchOutcome {
    let weights = PenaltyWeights::initial(epoch);
    let incumbent_cost = CostBreakdown::of_plan(&incumbent, epoch);
    let mut best = Best {
        score: objective.evaluate(&incumbent_cost, &weights, epoch),
        plan: incumbent,
        cost: incumbent_cost,
        from_search: false,
    };
    let finish = |best: Best, iterations, restarts| SearchOutcome {
        plan: best.plan,
        cost: best.cost,
        iterations,
        restarts,
        improved: best.from_search,
    };
    if epoch.request_count() == 0 {
        return finish(best, 0, 0);
    }

    let hood = Neighborhood::new(epoch, config.ls.granularity);
    let mut ls = LocalSearch::new(epoch, &hood, config.ls, objective);
    let mut pop = Population::new(config.population, weights, objective, epoch);

    for plan in warm_start {
        if Instant::now() >= deadline {
            break;
        }
        let w = *pop.weights();
        let ind = Individual::from_plan(ls.improve(plan, &w, rng), epoch, &w, objective);
        best.offer(&ind, pop.score(&ind.cost));
        pop.insert(ind);
    }
    initialize(
        &mut pop,
        epoch,
        &mut ls,
        config.search.initial_orderings,
        rng,
        Some(deadline),
    );
    for ind in pop.feasible().cloned().collect::<Vec<_>>() {
        let score = pop.score(&ind.cost);
        best.offer(&ind, score);
    }
    if pop.is_empty() {
        return finish(best, 0, 0);
    }

    let mut iterations = 0;
    let mut restarts = 0;
    let mut stalled = 0;
    let mut since_restart = 0;
    while Instant::now() < deadline
        && (config.search.stop_after == 0 || stalled < config.search.stop_after)
        && max_iterations.is_none_or(|m| iterations < m)
    {
        let child = generate_offspring(&pop, epoch, config.crossover.candidates, rng);
        let w = *pop.weights();
        let child = Individual::from_plan(ls.improve(&child.plan, &w, rng), epoch, &w, objective);
        pop.record_new(&child);
        let mut found = best.offer(&child, pop.score(&child.cost));
        let repair = !child.is_feasible() && rng.gen_bool(REPAIR_PROBABILITY);
        let plan = child.plan.clone();
        pop.insert(child);
        if repair {
            let strict = w.scaled(REPAIR_PENALTY_FACTOR);
            let fixed = Individual::from_plan(ls.improve(&plan, &strict, rng), epoch, &w, objective);
            if fixed.is_feasible() {
                found |= best.offer(&fixed, pop.score(&fixed.cost));
                pop.insert(fixed);
            }
        }

        iterations += 1;
        if iterations % config.population.adapt_period == 0 {
            pop.adapt_penalties();
        }
        if found {
            stalled = 0;
            since_restart = 0;
        } else {
            stalled += 1;
            since_restart += 1;
        }
        if since_restart >= config.search.restart_after && Instant::now() < deadline {
            pop.clear();
            let w = *pop.weights();
            pop.insert(Individual::from_plan(best.plan.clone(), epoch, &w, objective));
            initialize(
                &mut pop,
                epoch,
                &mut ls,
                config.search.initial_orderings,
                rng,
                Some(deadline),
            );
            since_restart = 0;
            restarts += 1;
        }
    }
    finish(best, iterations, restarts)
}
