//! Acceptance checks, one PASS/FAIL line each.
//!
//! Run with `cargo test -p dvrptw-core --test acceptance`. Extra arguments
//! restrict the run to checks whose name contains one of them.

mod common;

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dvrptw::batch::{cartesian_jobs, run_batch, run_job, Execution, Job, JobOutput};
use dvrptw::controller::{run_dynamic, Strategy};
use dvrptw::crossover::ox;
use dvrptw::evaluate::{fitness, CostBreakdown, Objective, PenaltyWeights, MAX_PENALTY, MIN_PENALTY};
use dvrptw::generate::{generate_instance, GeneratorParams};
use dvrptw::hgs::SolverConfig;
use dvrptw::io::runlog::{replay, RunHeader, RunLog};
use dvrptw::local_search::{LocalSearch, LsParams, MoveKind, Neighborhood};
use dvrptw::model::{EpochInstance, GiantTour, ProblemInstance, Request, RoutePlan, DEPOT};
use dvrptw::population::{Population, PopulationParams};
use dvrptw::sim::{SimConfig, Simulator};
use dvrptw::split::split;

type Check = fn() -> Result<String, String>;

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Check); 9] = [
        ("split optimality", split_optimality),
        ("crossover validity", crossover_validity),
        ("fitness formula", fitness_formula),
        ("local-search soundness", local_search_soundness),
        ("dynamic conservation", dynamic_conservation),
        ("baseline ordering", baseline_ordering),
        ("budget compliance", budget_compliance),
        ("determinism", determinism),
        ("penalty adaptation", penalty_adaptation),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn split_optimality() -> Result<String, String> {
    let mut tours = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cap = rng.gen_range(8..=30);
        let base = random_base(&mut rng, 8, cap);
        let epoch = random_epoch(&mut rng, &base, 1.0, 1, 1);
        for _ in 0..10 {
            let w = integer_weights(&mut rng);
            let len = rng.gen_range(1..=8);
            let mut tour = random_tour(&mut rng, &epoch, 1.0);
            tour.truncate(len);
            let got = plan_score(&split(&GiantTour::new(tour.clone()), &epoch, &w), &epoch, &w);
            let best = all_partitions(&tour)
                .into_iter()
                .map(|routes| plan_score(&RoutePlan::new(routes), &epoch, &w))
                .fold(f64::INFINITY, f64::min);
            ensure(got == best, || {
                format!("seed {seed} tour {tour:?}: split {got}, optimum {best}")
            })?;
            tours += 1;
        }
    }
    Ok(format!("{tours} tours on 100 instances match the exhaustive optimum"))
}

fn crossover_validity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut calls = 0;
    while calls < 10_000 {
        let n = rng.gen_range(1..=40);
        let base = random_base(&mut rng, n, 30);
        let must_go = rng.gen_range(0.0..=1.0);
        let epoch = random_epoch(&mut rng, &base, must_go, 1, 3);
        for _ in 0..50 {
            let (k1, k2) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
            let p1 = GiantTour::new(random_tour(&mut rng, &epoch, k1));
            let p2 = GiantTour::new(random_tour(&mut rng, &epoch, k2));
            let child = ox(&p1, &p2, &mut rng);
            let set: HashSet<usize> = child.0.iter().copied().collect();
            ensure(set.len() == child.len(), || format!("duplicate in {child:?}"))?;
            ensure(epoch.must_go_nodes().iter().all(|c| set.contains(c)), || {
                format!("must-go missing from {child:?}")
            })?;
            ensure(p2.0.iter().all(|c| set.contains(c)), || {
                format!("{child:?} lacks part of {p2:?}")
            })?;
            calls += 1;
        }
    }
    Ok(format!("{calls} offspring valid"))
}

/// Written straight from the displayed equation, grouped differently from
/// the library.
fn fitness_reference(c: &CostBreakdown, w: &PenaltyWeights, t: usize, big_t: usize) -> f64 {
    let terms = [
        (w.dist, c.s_dist),
        (w.cap, c.s_cap),
        (w.time, c.s_time),
        (w.late, c.s_late),
    ];
    let numerator: f64 = terms.iter().map(|&(p, s)| p * s as f64).sum();
    numerator * big_t as f64 / (((t - 1 + big_t) * (c.n + 1)) as f64)
}

fn fitness_formula() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    for i in 0..10_000 {
        let c = CostBreakdown {
            s_dist: rng.gen_range(0..100_000),
            s_cap: rng.gen_range(0..1_000),
            s_time: rng.gen_range(0..100_000),
            s_late: rng.gen_range(0..10_000_000),
            n: rng.gen_range(0..200),
        };
        let w = if i % 2 == 0 {
            PenaltyWeights {
                dist: 1.0,
                cap: rng.gen_range(1..=1000) as f64,
                time: rng.gen_range(1..=1000) as f64,
                late: 100.0,
            }
        } else {
            PenaltyWeights {
                dist: 1.0,
                cap: rng.gen_range(MIN_PENALTY..MAX_PENALTY),
                time: rng.gen_range(MIN_PENALTY..MAX_PENALTY),
                late: 100.0,
            }
        };
        let big_t = rng.gen_range(1..=10);
        let t = rng.gen_range(1..=big_t);
        let got = fitness(&c, &w, t, big_t);
        let want = fitness_reference(&c, &w, t, big_t);
        ensure(rel(got, want) <= 1e-12, || {
            format!("{c:?} {w:?} t={t}/{big_t}: {got} vs {want}")
        })?;
        for bumped in [
            CostBreakdown {
                s_dist: c.s_dist + 1,
                ..c
            },
            CostBreakdown {
                s_cap: c.s_cap + 1,
                ..c
            },
            CostBreakdown {
                s_time: c.s_time + 1,
                ..c
            },
            CostBreakdown {
                s_late: c.s_late + 1,
                ..c
            },
        ] {
            ensure(fitness(&bumped, &w, t, big_t) > got, || {
                format!("not increasing in a term at {bumped:?}")
            })?;
        }
        if t < big_t && want > 0.0 {
            ensure(fitness(&c, &w, t + 1, big_t) < got, || {
                format!("not decreasing in t at {c:?} t={t}/{big_t}")
            })?;
        }
    }
    Ok("10000 breakdowns within 1e-12; monotone in every term and decreasing in t".into())
}

fn replace_route(routes: &[Vec<usize>], changes: &[(usize, Vec<usize>)]) -> Vec<Vec<usize>> {
    let mut out = routes.to_vec();
    for (r, nodes) in changes {
        out[*r] = nodes.clone();
    }
    out
}

/// Every plan one relocate, swap, 2-opt or 2-opt* move away from `plan`.
fn single_moves(plan: &RoutePlan) -> Vec<(&'static str, Vec<Vec<usize>>)> {
    let routes = &plan.routes;
    let mut out = Vec::new();
    for (ra, a) in routes.iter().enumerate() {
        for i in 0..a.len() {
            let u = a[i];
            let mut rest = a.clone();
            rest.remove(i);
            // relocate within the route and to every position of other routes
            for k in 0..=rest.len() {
                let mut moved = rest.clone();
                moved.insert(k, u);
                if moved != *a {
                    out.push(("relocate", replace_route(routes, &[(ra, moved)])));
                }
            }
            for (rb, b) in routes.iter().enumerate().filter(|&(rb, _)| rb != ra) {
                for k in 0..=b.len() {
                    let mut to = b.clone();
                    to.insert(k, u);
                    out.push(("relocate", replace_route(routes, &[(ra, rest.clone()), (rb, to)])));
                }
            }
            if a.len() > 1 {
                let mut plus = replace_route(routes, &[(ra, rest.clone())]);
                plus.push(vec![u]);
                out.push(("relocate", plus));
            }
            // swap and 2-opt within the route
            for j in i + 1..a.len() {
                let mut s = a.clone();
                s.swap(i, j);
                out.push(("swap", replace_route(routes, &[(ra, s)])));
                let mut rev = a.clone();
                rev[i..=j].reverse();
                out.push(("2-opt", replace_route(routes, &[(ra, rev)])));
            }
            for (rb, b) in routes.iter().enumerate().filter(|&(rb, _)| rb != ra) {
                for j in 0..b.len() {
                    if rb > ra {
                        let (mut x, mut y) = (a.clone(), b.clone());
                        std::mem::swap(&mut x[i], &mut y[j]);
                        out.push(("swap", replace_route(routes, &[(ra, x), (rb, y)])));
                    }
                    let mut na = a[..=i].to_vec();
                    na.extend_from_slice(&b[j..]);
                    let mut nb = b[..j].to_vec();
                    nb.extend_from_slice(&a[i + 1..]);
                    out.push(("2-opt*", replace_route(routes, &[(ra, na), (rb, nb)])));
                }
            }
        }
    }
    out
}

fn local_search_soundness() -> Result<String, String> {
    let mut moves_checked = 0usize;
    let (mut deletes, mut swap_outs) = (0usize, 0usize);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cap = rng.gen_range(10..=25);
        let base = random_base(&mut rng, 8, cap);
        let epoch = random_epoch(&mut rng, &base, 0.5, 2, 4);
        let w = integer_weights(&mut rng);
        let hood = Neighborhood::new(&epoch, 8);
        let params = LsParams {
            granularity: 8,
            ..LsParams::default()
        };
        let mut ls = LocalSearch::new(&epoch, &hood, params, Objective::Dynamic).with_trace();
        let start = split(&GiantTour::new(random_tour(&mut rng, &epoch, 0.6)), &epoch, &w);
        let out = ls.improve(&start, &w, &mut rng);
        for m in ls.take_trace() {
            let violation = |p: &RoutePlan| {
                let c = CostBreakdown::of_plan(p, &epoch);
                w.violation(c.s_cap, c.s_time)
            };
            match m.kind {
                MoveKind::Delete => {
                    deletes += 1;
                    ensure(violation(&m.after) < violation(&m.before), || {
                        format!("seed {seed}: delete did not reduce violation")
                    })?;
                }
                MoveKind::SwapOut => {
                    swap_outs += 1;
                    ensure(
                        plan_score(&m.after, &epoch, &w) < plan_score(&m.before, &epoch, &w),
                        || format!("seed {seed}: swap-out did not reduce the static score"),
                    )?;
                }
                _ => {}
            }
        }
        let score = plan_score(&out, &epoch, &w);
        for (kind, routes) in single_moves(&out) {
            let routes: Vec<Vec<usize>> = routes.into_iter().filter(|r| !r.is_empty()).collect();
            let alt = plan_score(&RoutePlan::new(routes.clone()), &epoch, &w);
            ensure(alt >= score, || {
                format!(
                    "seed {seed}: {kind} to {routes:?} scores {alt} < {score} from {:?}",
                    out.routes
                )
            })?;
            moves_checked += 1;
        }
    }
    Ok(format!(
        "100 epochs locally optimal over {moves_checked} moves; {deletes} deletes and {swap_outs} swap-outs all strict"
    ))
}

/// Latest epoch a request may leave in, recomputed from the instance.
fn must_go_epoch(r: &Request, base: &ProblemInstance, sim: &SimConfig) -> usize {
    let big_t = sim.epoch_count;
    (r.first_epoch..big_t)
        .find(|&t| sim.horizon_start + t as i64 * sim.epoch_duration + base.travel[DEPOT][r.profile] > r.tw_end)
        .unwrap_or(big_t)
}

/// Route distance from the base matrix, or an error if a window or the
/// capacity is broken.
fn check_route(
    route: &[u64],
    depart: i64,
    reqs: &HashMap<u64, Request>,
    base: &ProblemInstance,
) -> Result<i64, String> {
    let (mut at, mut clock, mut load, mut dist) = (DEPOT, depart, 0, 0);
    let mut service = 0;
    for id in route {
        let r = &reqs[id];
        clock += service + base.travel[at][r.profile];
        dist += base.travel[at][r.profile];
        clock = clock.max(r.tw_start);
        if clock > r.tw_end {
            return Err(format!("request {id} reached at {clock} after {}", r.tw_end));
        }
        load += r.demand;
        service = r.service_time;
        at = r.profile;
    }
    if load > base.capacity {
        return Err(format!("load {load} over {}", base.capacity));
    }
    Ok(dist + base.travel[at][DEPOT])
}

fn quick_solver() -> SolverConfig {
    let mut s = SolverConfig::default();
    s.search.stop_after = 300;
    s.search.initial_orderings = 5;
    s
}

fn dynamic_conservation() -> Result<String, String> {
    let sim_config = SimConfig {
        epoch_count: 5,
        requests_per_epoch: 8.0,
        ..SimConfig::default()
    };
    let mut requests = 0;
    for seed in 1..=50u64 {
        let strategy = Strategy::ALL[(seed as usize - 1) % Strategy::ALL.len()];
        let base = generate_instance(&GeneratorParams::default(), 100 + seed);
        let job = Job {
            instance: Arc::new(base.clone()),
            strategy,
            seed,
            sim: sim_config,
            solver: quick_solver(),
            budget: Duration::from_secs(2),
        };
        let out = run_job(&job).map_err(|e| format!("seed {seed} {strategy}: {e}"))?;
        let header = RunHeader {
            strategy,
            seed,
            budget_s: 2.0,
            sim: sim_config,
            solver: job.solver,
            instance: base.clone(),
        };
        let mut bytes = Vec::new();
        RunLog::from_outcome(header, &out.outcome, true)
            .write(&mut bytes)
            .map_err(|e| e.to_string())?;
        let log = RunLog::read(bytes.as_slice()).map_err(|e| e.to_string())?;
        let fail = |m: String| format!("seed {seed} {strategy}: {m}");

        let truth = Simulator::new(base.clone(), sim_config, seed, true).map_err(|e| e.to_string())?;
        let reqs: HashMap<u64, Request> = truth
            .arrivals()
            .unwrap()
            .iter()
            .flatten()
            .map(|r| (r.id, r.clone()))
            .collect();
        let mut when: HashMap<u64, usize> = HashMap::new();
        let mut total = 0;
        for e in &log.epochs {
            let depart = sim_config.horizon_start + (e.epoch as i64 - 1) * sim_config.epoch_duration;
            let mut cost = 0;
            for route in &e.routes {
                for id in route {
                    ensure(reqs.contains_key(id), || fail(format!("unknown request {id}")))?;
                    ensure(when.insert(*id, e.epoch).is_none(), || {
                        fail(format!("request {id} dispatched twice"))
                    })?;
                }
                cost +=
                    check_route(route, depart, &reqs, &base).map_err(|m| fail(format!("epoch {}: {m}", e.epoch)))?;
            }
            ensure(cost == e.cost, || {
                fail(format!("epoch {} logged {} but routes cost {cost}", e.epoch, e.cost))
            })?;
            total += cost;
        }
        ensure(total == log.summary.total_cost, || {
            fail(format!("total {} vs {total}", log.summary.total_cost))
        })?;
        ensure(when.len() == reqs.len(), || {
            fail(format!("{} of {} dispatched", when.len(), reqs.len()))
        })?;
        for (id, r) in &reqs {
            let e = when[id];
            let m = must_go_epoch(r, &base, &sim_config);
            ensure(e >= r.first_epoch && e <= m, || {
                fail(format!(
                    "request {id} arrived {} must go by {m} left in {e}",
                    r.first_epoch
                ))
            })?;
        }
        replay(&log).map_err(|e| fail(e.to_string()))?;
        requests += reqs.len();
    }
    Ok(format!(
        "50 runs, {requests} requests each dispatched once, feasibly and on time"
    ))
}

const BASELINE_BUDGET: Duration = Duration::from_secs(10);

fn baseline_runs() -> &'static Result<Vec<JobOutput>, String> {
    static RUNS: OnceLock<Result<Vec<JobOutput>, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let instances: Vec<_> = (1..=20)
            .map(|s| Arc::new(generate_instance(&GeneratorParams::default(), s)))
            .collect();
        let jobs = cartesian_jobs(
            &instances,
            &Strategy::ALL,
            &[1, 2, 3],
            SimConfig::default(),
            SolverConfig::default(),
            BASELINE_BUDGET,
        );
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        run_batch(&jobs, Execution::Parallel { threads })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())
    })
}

fn median(mut xs: Vec<i64>) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

fn baseline_ordering() -> Result<String, String> {
    let runs = baseline_runs().as_ref()?;
    let med = |s: Strategy| {
        median(
            runs.iter()
                .filter(|o| o.outcome.strategy == s)
                .map(|o| o.row.total_cost)
                .collect(),
        )
    };
    let [dhgs, greedy, lazy, random, oracle] = Strategy::ALL.map(med);
    let best = greedy.min(lazy).min(random);
    let improvement = 100.0 * (best - dhgs) / best;
    let summary = format!(
        "medians dhgs {dhgs} greedy {greedy} lazy {lazy} random {random} oracle {oracle}; improvement {improvement:.2}%"
    );
    ensure(
        dhgs <= greedy && dhgs <= lazy && improvement >= 0.0 && oracle <= greedy,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn budget_compliance() -> Result<String, String> {
    let runs = baseline_runs().as_ref()?;
    let (mut slowest, mut slowest_oracle) = (0.0f64, 0.0f64);
    let mut epochs = 0;
    for o in runs {
        let allowed = (BASELINE_BUDGET * o.outcome.strategy.budget_multiplier()).as_secs_f64() + 2.0;
        for e in &o.outcome.epochs {
            let slot = if o.outcome.strategy == Strategy::Oracle {
                &mut slowest_oracle
            } else {
                &mut slowest
            };
            *slot = slot.max(e.wall_time_s);
            epochs += 1;
            ensure(e.wall_time_s <= allowed, || {
                format!(
                    "{} seed {} epoch {}: {:.2}s",
                    o.row.instance, o.row.seed, e.epoch, e.wall_time_s
                )
            })?;
        }
    }
    Ok(format!(
        "{epochs} epochs; slowest {slowest:.2}s (allowed {:.0}s), oracle {slowest_oracle:.2}s (allowed {:.0}s)",
        BASELINE_BUDGET.as_secs_f64() + 2.0,
        2.0 * BASELINE_BUDGET.as_secs_f64() + 2.0
    ))
}

fn determinism() -> Result<String, String> {
    let base = generate_instance(&GeneratorParams::default(), 42);
    let sim_config = SimConfig::default();
    let solver = SolverConfig::default();
    let budget = Duration::from_secs(60);
    let run = || -> Result<Vec<u8>, String> {
        let mut sim = Simulator::new(base.clone(), sim_config, 9, false).map_err(|e| e.to_string())?;
        let outcome = run_dynamic(&mut sim, Strategy::Dhgs, budget, &solver, 9).map_err(|e| e.to_string())?;
        let header = RunHeader {
            strategy: Strategy::Dhgs,
            seed: 9,
            budget_s: budget.as_secs_f64(),
            sim: sim_config,
            solver,
            instance: base.clone(),
        };
        let mut bytes = Vec::new();
        RunLog::from_outcome(header, &outcome, false)
            .write(&mut bytes)
            .map_err(|e| e.to_string())?;
        Ok(bytes)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "run logs differ".into())?;
    Ok(format!("two runs produced identical {}-byte logs", a.len()))
}

fn tiny_epoch() -> EpochInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random_base(&mut rng, 3, 10);
    random_epoch(&mut rng, &base, 1.0, 1, 1)
}

/// Feeds `periods` adaptation periods whose feasible fraction is `fraction`
/// and returns the capacity weight after each.
fn drive(start: f64, fraction: f64, periods: usize) -> Vec<f64> {
    let epoch = tiny_epoch();
    let params = PopulationParams::default();
    let weights = PenaltyWeights {
        cap: start,
        time: start,
        ..PenaltyWeights::default()
    };
    let mut pop = Population::new(params, weights, Objective::Dynamic, &epoch);
    let ok = (fraction * params.adapt_period as f64).round() as usize;
    (0..periods)
        .map(|_| {
            for i in 0..params.adapt_period {
                pop.record_feasibility(i < ok, i < ok);
            }
            pop.adapt_penalties();
            assert_eq!(pop.weights().cap, pop.weights().time);
            pop.weights().cap
        })
        .collect()
}

fn penalty_adaptation() -> Result<String, String> {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let target = PopulationParams::default().target_feasible;
    let cases = [
        (1.0, 0.0, 1.2),
        (1.0, 1.0, 0.85),
        (50.0, 0.1, 1.2),
        (50.0, 0.5, 0.85),
        (3.0, target, 1.0),
        (3.0, target + 0.04, 1.0),
    ];
    for (start, f, factor) in cases {
        let got = drive(start, f, 10);
        for (k, w) in got.iter().enumerate() {
            let want = start * f64::powi(factor, k as i32 + 1);
            ensure(rel(*w, want) <= 1e-9, || {
                format!("start {start} f {f} period {}: {w} vs {want}", k + 1)
            })?;
        }
    }
    for (start, f) in [(90_000.0, 0.0), (0.2, 1.0)] {
        let got = drive(start, f, 50);
        ensure(got.iter().all(|w| (MIN_PENALTY..=MAX_PENALTY).contains(w)), || {
            format!("left bounds: {got:?}")
        })?;
        let end = *got.last().unwrap();
        ensure(end == MAX_PENALTY || end == MIN_PENALTY, || {
            format!("did not reach a bound: {end}")
        })?;
    }
    Ok(format!(
        "1.2^10 trajectory ends at {:.6}; weights clamped to [0.1, 100000]",
        drive(1.0, 0.0, 10)[9]
    ))
}
