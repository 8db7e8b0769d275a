//! `tndp`: design bus-route networks for a city.
//!
//! Subcommands cover the whole workflow: generate or load a city instance,
//! construct a network by sampled rollouts, improve it with the evolutionary
//! optimizer, evaluate any network file against the cost model, and sweep the
//! passenger/operator trade-off across alpha values. Every run writes a
//! `spec.json` echo so results can be reproduced with `tndp run --spec`.

mod run;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use tndp::citygraph::{GrowthProcess, SyntheticCityConfig, TimeUnit};
use tndp::evolve::{EaParams, EaVariant};

use crate::spec::{CitySource, CommandKind, PolicySpec, ProblemOverrides, RunSpec};

#[derive(Parser)]
#[command(name = "tndp", version, about = "Transit network design: construct, evolve, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city and write it as canonical city JSON.
    GenCity(GenCityArgs),
    /// Build a network as the best of N construction rollouts.
    Construct(SolveArgs),
    /// Run the evolutionary optimizer (construction-sampled start, mutation
    /// and selection stages). With the default uniform policy and combine
    /// variant this is the random path-combining configuration; a score
    /// table policy slots an externally learned scorer into the same search.
    Evolve(SolveArgs),
    /// Evaluate a network file against a city and print the report as JSON.
    Eval(EvalArgs),
    /// Grid of runs over alpha values and seeds, reported as plot-ready CSV.
    Sweep(SolveArgs),
    /// Execute a run spec JSON file (as echoed into every output directory).
    Run(RunArgs),
}

#[derive(Args)]
struct CityArgs {
    /// City instance as canonical JSON.
    #[arg(long, value_name = "FILE")]
    city: Option<PathBuf>,
    /// Named benchmark instance: mandl, mumford0, mumford1, mumford2, mumford3.
    #[arg(long, conflicts_with = "city")]
    preset: Option<String>,
    /// Drive-time matrix file (needs --demand).
    #[arg(long, value_name = "FILE", requires = "demand", conflicts_with_all = ["city", "preset"])]
    times: Option<PathBuf>,
    /// Demand matrix file (needs --times).
    #[arg(long, value_name = "FILE", requires = "times")]
    demand: Option<PathBuf>,
    /// Unit of the --times entries.
    #[arg(long, value_parser = parse_time_unit)]
    time_unit: Option<TimeUnit>,
    /// Directory holding benchmark preset data.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
}

impl CityArgs {
    fn into_source(self) -> CitySource {
        CitySource {
            city: self.city,
            preset: self.preset,
            times: self.times,
            demand: self.demand,
            time_unit: self.time_unit,
            data_dir: self.data_dir,
            generate: None,
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Number of routes the network must have.
    #[arg(long)]
    routes: Option<usize>,
    /// Minimum stops per route.
    #[arg(long)]
    min_stops: Option<usize>,
    /// Maximum stops per route.
    #[arg(long)]
    max_stops: Option<usize>,
    /// Transfer penalty in seconds.
    #[arg(long)]
    transfer_penalty: Option<f64>,
    /// Constraint-penalty weight.
    #[arg(long)]
    beta: Option<f64>,
}

impl ProblemArgs {
    fn into_overrides(self) -> ProblemOverrides {
        ProblemOverrides {
            routes: self.routes,
            min_stops: self.min_stops,
            max_stops: self.max_stops,
            transfer_penalty: self.transfer_penalty,
            beta: self.beta,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    city: CityArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Passenger/operator trade-off weight(s) in [0, 1]; repeat or
    /// comma-separate for a batch. Sweep defaults to 0.0 through 1.0 in 0.1
    /// steps, other commands to 1.0.
    #[arg(long = "alpha", value_delimiter = ',', num_args = 1..)]
    alphas: Vec<f64>,
    /// Random seed(s); one run per (alpha, seed) pair. Sweep defaults to
    /// 0 through 9, other commands to 0.
    #[arg(long = "seeds", value_delimiter = ',', num_args = 1.., alias = "seed")]
    seeds: Vec<u64>,
    /// Optimizer iterations.
    #[arg(long, default_value_t = EaParams::default().iterations)]
    iters: usize,
    /// Population size.
    #[arg(long, default_value_t = EaParams::default().population)]
    pop: usize,
    /// Mutation passes per iteration.
    #[arg(long, default_value_t = EaParams::default().mutations_per_stage)]
    mut_per_stage: usize,
    /// Probability that the one-stop tweak deletes instead of adding.
    #[arg(long, default_value_t = EaParams::default().deletion_prob)]
    deletion_prob: f64,
    /// Heavy mutator: "ea" (shortest-path route replacement) or "combine"
    /// (delete a route and rebuild it with a construction rollout).
    #[arg(long, value_parser = parse_variant, default_value = "combine")]
    variant: EaVariant,
    /// Construction rollouts sampled for the starting network.
    #[arg(long, default_value_t = EaParams::default().init_samples)]
    lc_n: usize,
    /// Construction policy: uniform, demand, or table:<scores.json>.
    #[arg(long, default_value = "uniform")]
    policy: PolicySpec,
    /// Steer construction to connect all demand before halting routes.
    #[arg(long)]
    enforce_connectivity: bool,
    /// Report operator cost summed over both driving directions.
    #[arg(long)]
    double_co: bool,
    /// Bus headway in minutes; adds fleet size and daily cost to reports.
    #[arg(long)]
    headway_min: Option<f64>,
    /// Directory for artifacts (spec echo, networks, reports, CSVs).
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

impl SolveArgs {
    fn into_spec(self, command: CommandKind) -> RunSpec {
        let (default_alphas, default_seeds): (Vec<f64>, Vec<u64>) =
            if command == CommandKind::Sweep {
                ((0..=10).map(|k| k as f64 / 10.0).collect(), (0..10).collect())
            } else {
                (vec![1.0], vec![0])
            };
        let alphas = if self.alphas.is_empty() { default_alphas } else { self.alphas };
        let seeds = if self.seeds.is_empty() { default_seeds } else { self.seeds };
        RunSpec {
            command,
            city: self.city.into_source(),
            problem: self.problem.into_overrides(),
            alphas,
            seeds,
            ea: EaParams {
                population: self.pop,
                iterations: self.iters,
                mutations_per_stage: self.mut_per_stage,
                deletion_prob: self.deletion_prob,
                variant: self.variant,
                init_samples: self.lc_n,
            },
            policy: self.policy,
            enforce_connectivity: self.enforce_connectivity,
            double_co: self.double_co,
            headway_min: self.headway_min,
            network: None,
            out: None,
            out_dir: Some(self.out_dir),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    city: CityArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Network file to evaluate (JSON: {"routes": [[stop, ...], ...]}).
    #[arg(long, value_name = "FILE")]
    network: PathBuf,
    /// Trade-off weight used for the scalarized total.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Report operator cost summed over both driving directions.
    #[arg(long)]
    double_co: bool,
    /// Bus headway in minutes; adds fleet size and daily cost to the report.
    #[arg(long)]
    headway_min: Option<f64>,
    /// Also write the report JSON here (it always goes to stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenCityArgs {
    /// Number of nodes.
    #[arg(long, default_value_t = SyntheticCityConfig::default().n)]
    n: usize,
    /// Street layout: 4nn, 4grid, 8grid, or voronoi.
    #[arg(long, value_parser = parse_process, default_value = "4nn")]
    process: GrowthProcess,
    /// Street-edge deletion probability (ignored by voronoi).
    #[arg(long, default_value_t = SyntheticCityConfig::default().rho)]
    rho: f64,
    /// Side of the square service area, metres.
    #[arg(long, default_value_t = SyntheticCityConfig::default().area_side)]
    area_side: f64,
    /// Vehicle speed, m/s.
    #[arg(long, default_value_t = SyntheticCityConfig::default().speed)]
    speed: f64,
    /// Lower bound of the uniform per-pair demand.
    #[arg(long, default_value_t = SyntheticCityConfig::default().demand_range.0)]
    demand_min: f64,
    /// Upper bound of the uniform per-pair demand.
    #[arg(long, default_value_t = SyntheticCityConfig::default().demand_range.1)]
    demand_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the city JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

impl GenCityArgs {
    fn into_spec(self) -> RunSpec {
        RunSpec {
            command: CommandKind::GenCity,
            city: CitySource {
                generate: Some(SyntheticCityConfig {
                    n: self.n,
                    process: self.process,
                    rho: self.rho,
                    area_side: self.area_side,
                    speed: self.speed,
                    demand_range: (self.demand_min, self.demand_max),
                }),
                ..CitySource::default()
            },
            problem: ProblemOverrides::default(),
            alphas: vec![1.0],
            seeds: vec![self.seed],
            ea: EaParams::default(),
            policy: PolicySpec::Uniform,
            enforce_connectivity: false,
            double_co: false,
            headway_min: None,
            network: None,
            out: Some(self.out),
            out_dir: None,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Run spec JSON file.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Override the spec's output directory.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

fn parse_time_unit(s: &str) -> Result<TimeUnit, String> {
    match s {
        "seconds" => Ok(TimeUnit::Seconds),
        "minutes" => Ok(TimeUnit::Minutes),
        other => Err(format!("unknown time unit '{other}' (seconds or minutes)")),
    }
}

fn parse_variant(s: &str) -> Result<EaVariant, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_process(s: &str) -> Result<GrowthProcess, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn build_spec(command: Command) -> Result<RunSpec> {
    Ok(match command {
        Command::GenCity(args) => args.into_spec(),
        Command::Construct(args) => args.into_spec(CommandKind::Construct),
        Command::Evolve(args) => args.into_spec(CommandKind::Evolve),
        Command::Sweep(args) => args.into_spec(CommandKind::Sweep),
        Command::Eval(args) => RunSpec {
            command: CommandKind::Eval,
            city: args.city.into_source(),
            problem: args.problem.into_overrides(),
            alphas: vec![args.alpha],
            seeds: vec![0],
            ea: EaParams::default(),
            policy: PolicySpec::Uniform,
            enforce_connectivity: false,
            double_co: args.double_co,
            headway_min: args.headway_min,
            network: Some(args.network),
            out: args.out,
            out_dir: None,
        },
        Command::Run(args) => {
            let mut spec = RunSpec::load(&args.spec)?;
            if let Some(dir) = args.out_dir {
                spec.out_dir = Some(dir);
            }
            if spec.command == CommandKind::GenCity && spec.city.generate.is_none() {
                bail!("a gen-city spec needs a city.generate block");
            }
            spec
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match build_spec(cli.command).and_then(|spec| run::execute(&spec)) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
