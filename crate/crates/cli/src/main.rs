use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dvrptw::batch::{cartesian_jobs, run_batch, Execution};
use dvrptw::controller::{run_dynamic, solve_static as solve_all, static_epoch, Strategy};
use dvrptw::evaluate::CostBreakdown;
use dvrptw::generate::{generate_instance, GeneratorParams};
use dvrptw::hgs::SolverConfig;
use dvrptw::io::config::{resolve_config, to_toml, CONFIG_ENV};
use dvrptw::io::instance::read_instance;
use dvrptw::io::results::write_results_file;
use dvrptw::io::runlog::{replay, RunHeader, RunLog};
use dvrptw::model::{validate_plan, ProblemInstance};
use dvrptw::sim::{SimConfig, Simulator};

#[derive(Parser)]
#[command(
    name = "dvrptw",
    version,
    about = "Dynamic VRPTW solver, simulator and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Route every customer of an instance in one static solve.
    SolveStatic {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run one dynamic simulation and write its run log.
    Simulate {
        /// Solomon-format base instance; omit with --generate.
        #[arg(required_unless_present = "generate", conflicts_with = "generate")]
        instance: Option<PathBuf>,
        /// Use a generated base instance instead of a file.
        #[arg(long)]
        generate: bool,
        /// Seed of the generated instance; defaults to --seed.
        #[arg(long)]
        instance_seed: Option<u64>,
        #[arg(long, default_value_t = 50)]
        customers: usize,
        #[arg(long)]
        strategy: Strategy,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Allow the oracle to see future epochs.
        #[arg(long)]
        hindsight: bool,
        /// Run log destination; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave wall times out of the run log so equal runs give equal bytes.
        #[arg(long)]
        omit_timing: bool,
    },
    /// Run every (instance, strategy, seed) combination and write a CSV.
    Bench {
        /// Directory of Solomon-format instances, or a number of instances
        /// to generate.
        #[arg(long)]
        instances: String,
        #[arg(long)]
        customers: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "dhgs,greedy,lazy,random")]
        strategies: Vec<Strategy>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Required when the oracle is among the strategies.
        #[arg(long)]
        hindsight: bool,
        /// Worker threads; 1 runs everything on the calling thread.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Directory to write one run log per job into.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Replay a run log and check it.
    Validate { runlog: PathBuf },
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 3600)]
    epoch_duration: i64,
    #[arg(long, default_value_t = 8.0)]
    requests_per_epoch: f64,
    #[arg(long, default_value_t = 0)]
    horizon_start: i64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            epoch_count: self.epochs,
            epoch_duration: self.epoch_duration,
            requests_per_epoch: self.requests_per_epoch,
            horizon_start: self.horizon_start,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Seconds per epoch.
    #[arg(long, default_value = "10", value_parser = parse_budget)]
    budget: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Solver configuration file; defaults to $DVRPTW_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolverArgs {
    fn resolve(&self) -> Result<SolverConfig> {
        let (config, source) = resolve_config(self.config.as_deref())?;
        match source {
            Some(p) => eprintln!("# solver configuration from {}", p.display()),
            None => eprintln!("# solver configuration: defaults (set --config or {CONFIG_ENV})"),
        }
        eprint!("{}", indent(&to_toml(&config)));
        eprintln!("# seed = {}\n# budget_s = {}", self.seed, self.budget);
        Ok(config)
    }

    fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.budget)
    }
}

fn parse_budget(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("budget must be positive".into())
    }
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("#   {l}\n")).collect()
}

fn print_sim(config: &SimConfig) {
    eprintln!(
        "# epochs = {}, epoch_duration = {}, requests_per_epoch = {}, horizon_start = {}",
        config.epoch_count, config.epoch_duration, config.requests_per_epoch, config.horizon_start
    );
}

fn usage(message: &str) -> ! {
    use clap::CommandFactory;
    Cli::command()
        .error(clap::error::ErrorKind::ArgumentConflict, message)
        .exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveStatic { instance, solver } => solve_static(&instance, &solver),
        Command::Simulate {
            instance,
            generate: _,
            instance_seed,
            customers,
            strategy,
            sim,
            solver,
            hindsight,
            out,
            omit_timing,
        } => {
            if strategy == Strategy::Oracle && !hindsight {
                usage("the oracle strategy needs --hindsight");
            }
            let base = match instance {
                Some(path) => read_instance(&path).with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let seed = instance_seed.unwrap_or(solver.seed);
                    let params = GeneratorParams {
                        customers,
                        ..GeneratorParams::default()
                    };
                    eprintln!("# generated instance: customers = {customers}, seed = {seed}");
                    generate_instance(&params, seed)
                }
            };
            simulate(base, strategy, &sim, &solver, hindsight, out.as_deref(), omit_timing)
        }
        Command::Bench {
            instances,
            customers,
            strategies,
            seeds,
            out,
            sim,
            solver,
            hindsight,
            parallel,
            logs,
        } => {
            if strategies.contains(&Strategy::Oracle) && !hindsight {
                usage("the oracle strategy needs --hindsight");
            }
            if parallel == 0 {
                usage("--parallel must be at least 1");
            }
            bench(
                &instances,
                customers,
                &strategies,
                &seeds,
                &out,
                &sim,
                &solver,
                parallel,
                logs.as_deref(),
            )
        }
        Command::Validate { runlog } => {
            let log = RunLog::read_file(&runlog)?;
            let report = replay(&log)?;
            println!(
                "ok: {} epochs, {} requests dispatched once each, total cost {}",
                report.epochs, report.requests, report.total_cost
            );
            Ok(())
        }
    }
}

fn solve_static(path: &Path, args: &SolverArgs) -> Result<()> {
    let config = args.resolve()?;
    let base = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
    let epoch = static_epoch(&base)?;
    let start = Instant::now();
    let (plan, iterations) = solve_all(&epoch, &config, args.duration(), args.seed);
    let report = validate_plan(&plan, &epoch);
    if !report.is_hard_feasible() {
        bail!("solver returned an infeasible plan: {report}");
    }
    let cost = CostBreakdown::of_plan(&plan, &epoch);
    println!("instance {}", base.name);
    println!("cost {}", cost.s_dist);
    println!("routes {}", plan.routes.len());
    println!("iterations {iterations}");
    println!("time_s {:.3}", start.elapsed().as_secs_f64());
    for (i, r) in plan.routes.iter().enumerate() {
        let ids: Vec<String> = r.iter().map(|&n| epoch.request(n).profile.to_string()).collect();
        println!("route {}: {}", i + 1, ids.join(" "));
    }
    Ok(())
}

fn simulate(
    base: ProblemInstance,
    strategy: Strategy,
    sim_args: &SimArgs,
    solver_args: &SolverArgs,
    hindsight: bool,
    out: Option<&Path>,
    omit_timing: bool,
) -> Result<()> {
    let solver = solver_args.resolve()?;
    let sim_config = sim_args.config();
    print_sim(&sim_config);
    eprintln!("# strategy = {strategy}, instance = {}", base.name);
    let mut sim = Simulator::new(base.clone(), sim_config, solver_args.seed, hindsight)?;
    let outcome = run_dynamic(&mut sim, strategy, solver_args.duration(), &solver, solver_args.seed)?;
    let header = RunHeader {
        strategy,
        seed: solver_args.seed,
        budget_s: solver_args.budget,
        sim: sim_config,
        solver,
        instance: base,
    };
    let log = RunLog::from_outcome(header, &outcome, !omit_timing);
    match out {
        Some(path) => {
            log.write_file(path)?;
            eprintln!("total cost {} (log: {})", outcome.total_cost, path.display());
        }
        None => {
            log.write(std::io::stdout().lock())?;
            eprintln!("total cost {}", outcome.total_cost);
        }
    }
    Ok(())
}

fn load_instances(spec: &str, customers: Option<usize>) -> Result<Vec<Arc<ProblemInstance>>> {
    if let Ok(count) = spec.parse::<usize>() {
        if count == 0 {
            usage("--instances must name a directory or a positive count");
        }
        let params = GeneratorParams {
            customers: customers.unwrap_or(GeneratorParams::default().customers),
            ..GeneratorParams::default()
        };
        return Ok((1..=count as u64)
            .map(|s| Arc::new(generate_instance(&params, s)))
            .collect());
    }
    let dir = Path::new(spec);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no instance files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            Ok(Arc::new(
                read_instance(p).with_context(|| format!("reading {}", p.display()))?,
            ))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn bench(
    instances: &str,
    customers: Option<usize>,
    strategies: &[Strategy],
    seeds: &[u64],
    out: &Path,
    sim_args: &SimArgs,
    solver_args: &SolverArgs,
    parallel: usize,
    logs: Option<&Path>,
) -> Result<()> {
    let solver = solver_args.resolve()?;
    let sim_config = sim_args.config();
    print_sim(&sim_config);
    let instances = load_instances(instances, customers)?;
    let names: Vec<&str> = strategies.iter().map(|s| s.name()).collect();
    eprintln!(
        "# instances = {}, strategies = {}, seeds = {:?}, parallel = {parallel}",
        instances.len(),
        names.join(","),
        seeds
    );
    let jobs = cartesian_jobs(
        &instances,
        strategies,
        seeds,
        sim_config,
        solver,
        solver_args.duration(),
    );
    let execution = if parallel > 1 {
        Execution::Parallel { threads: parallel }
    } else {
        Execution::Sequential
    };
    let mut rows = Vec::with_capacity(jobs.len());
    if let Some(dir) = logs {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for (job, result) in jobs.iter().zip(run_batch(&jobs, execution)) {
        let output = result.with_context(|| format!("{} / {} / seed {}", job.instance.name, job.strategy, job.seed))?;
        if let Some(dir) = logs {
            let header = RunHeader {
                strategy: job.strategy,
                seed: job.seed,
                budget_s: job.budget.as_secs_f64(),
                sim: job.sim,
                solver: job.solver,
                instance: (*job.instance).clone(),
            };
            let path = dir.join(format!("{}-{}-{}.jsonl", job.instance.name, job.strategy, job.seed));
            RunLog::from_outcome(header, &output.outcome, true).write_file(&path)?;
        }
        rows.push(output.row);
    }
    write_results_file(&rows, out)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
