//! Command runners: they take a resolved [`RunSpec`], produce artifacts on
//! disk, and report whether every produced network was feasible.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tndp::citygraph::{build_shortest_paths, CityGraph, ProblemParams, ShortestPathTable};
use tndp::evolve::{run_ea, EaParams, HistoryRow};
use tndp::mdp::{
    DemandScorer, Extension, HaltChoice, MdpEnv, MdpState, Policy, ScorePolicy, TableScorer,
    UniformPolicy,
};
use tndp::network::{check_constraints, EvalResult, TransitNetwork};

use crate::spec::{CommandKind, PolicySpec, RunSpec};

/// Whether a command's outputs were all feasible; decides the exit code
/// (0 feasible, 2 infeasible, 1 error).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Feasible,
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Feasible => 0,
            Outcome::Infeasible => 2,
        }
    }
}

/// The built-in policies behind `--policy`, dispatched at run time.
#[derive(Clone)]
pub enum AnyPolicy<'a> {
    Uniform(UniformPolicy),
    Demand(ScorePolicy<DemandScorer<'a>>),
    Table(ScorePolicy<TableScorer>),
}

impl Policy for AnyPolicy<'_> {
    fn choose_extension(
        &mut self,
        env: &MdpEnv,
        state: &MdpState,
        candidates: &[Extension],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        match self {
            AnyPolicy::Uniform(p) => p.choose_extension(env, state, candidates, rng),
            AnyPolicy::Demand(p) => p.choose_extension(env, state, candidates, rng),
            AnyPolicy::Table(p) => p.choose_extension(env, state, candidates, rng),
        }
    }

    fn choose_halt(&mut self, env: &MdpEnv, state: &MdpState, rng: &mut ChaCha8Rng) -> HaltChoice {
        match self {
            AnyPolicy::Uniform(p) => p.choose_halt(env, state, rng),
            AnyPolicy::Demand(p) => p.choose_halt(env, state, rng),
            AnyPolicy::Table(p) => p.choose_halt(env, state, rng),
        }
    }
}

pub fn build_policy<'a>(spec: &PolicySpec, city: &'a CityGraph) -> Result<AnyPolicy<'a>> {
    Ok(match spec {
        PolicySpec::Uniform => AnyPolicy::Uniform(UniformPolicy),
        PolicySpec::Demand => AnyPolicy::Demand(ScorePolicy::new(DemandScorer::new(city))),
        PolicySpec::Table(path) => {
            let scorer = TableScorer::load(path)
                .with_context(|| format!("loading score table {}", path.display()))?;
            scorer.check_city(city)?;
            AnyPolicy::Table(ScorePolicy::new(scorer))
        }
    })
}

/// Fleet report derived from the operator cost: `buses = C_o / headway`,
/// daily operating cost 200 per bus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fleet {
    pub headway_min: f64,
    pub buses: f64,
    pub daily_cost: f64,
}

/// The user-facing evaluation report: table metrics in minutes plus the raw
/// full-precision result (seconds domain) for programmatic round trips.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub alpha: f64,
    pub double_co: bool,
    pub cp_minutes: f64,
    pub co_minutes: f64,
    pub constraint_cost: f64,
    pub total_cost: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_un: f64,
    pub num_routes: usize,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fleet: Option<Fleet>,
    pub raw: EvalResult,
}

pub fn make_report(result: EvalResult, spec: &RunSpec, alpha: f64) -> Report {
    let co_minutes =
        result.operator_cost / 60.0 * if spec.double_co { 2.0 } else { 1.0 };
    let fleet = spec.headway_min.map(|h| {
        let buses = co_minutes / h;
        Fleet { headway_min: h, buses, daily_cost: 200.0 * buses }
    });
    Report {
        alpha,
        double_co: spec.double_co,
        cp_minutes: result.passenger_cost / 60.0,
        co_minutes,
        constraint_cost: result.constraint_cost,
        total_cost: result.total_cost,
        d0: result.d0,
        d1: result.d1,
        d2: result.d2,
        d_un: result.d_un,
        num_routes: result.num_routes,
        feasible: result.feasible,
        fleet,
        raw: result,
    }
}

pub fn run_gen_city(spec: &RunSpec) -> Result<Outcome> {
    let cfg = spec
        .city
        .generate
        .clone()
        .context("gen-city needs a generator configuration")?;
    let out = spec.out.clone().context("gen-city needs --out")?;
    // Stop bounds only matter for later solving; pick the widest valid ones.
    let params = ProblemParams::new(1, 2, 2.max(cfg.n));
    let city = crate::spec::generate_for_gen_city(&cfg, params, spec.seeds[0])?;
    tndp::citygraph::save_city(&city, &out)?;
    eprintln!(
        "wrote {} ({} nodes, {} street edges)",
        out.display(),
        city.n(),
        city.num_edges()
    );
    Ok(Outcome::Feasible)
}

/// One grid cell of a construct / evolve / sweep batch.
struct Cell {
    alpha: f64,
    seed: u64,
    outcome: Result<CellRun>,
    wall_secs: f64,
}

struct CellRun {
    network: TransitNetwork,
    result: EvalResult,
    history: Vec<HistoryRow>,
    initial: EvalResult,
}

fn run_cells(
    spec: &RunSpec,
    city: &CityGraph,
    sp: &ShortestPathTable,
    base: ProblemParams,
    ea: &EaParams,
) -> Result<Vec<Cell>> {
    let policy = build_policy(&spec.policy, city)?;
    let grid: Vec<(f64, u64)> = spec
        .alphas
        .iter()
        .flat_map(|&a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut cells: Vec<Cell> = grid
        .into_par_iter()
        .map(|(alpha, seed)| {
            let start = Instant::now();
            let outcome = (|| -> Result<CellRun> {
                let mut params = base;
                params.alpha = alpha;
                let mut env = MdpEnv::new(city, sp, params)?;
                env.enforce_connectivity = spec.enforce_connectivity;
                let out = run_ea(&env, &policy, ea, seed)?;
                Ok(CellRun {
                    network: out.network,
                    result: out.result,
                    history: out.history,
                    initial: out.initial,
                })
            })();
            if let Err(e) = &outcome {
                log::error!("run alpha={alpha} seed={seed} failed: {e:#}");
            }
            Cell { alpha, seed, outcome, wall_secs: start.elapsed().as_secs_f64() }
        })
        .collect();
    cells.sort_by(|a, b| {
        a.alpha
            .partial_cmp(&b.alpha)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });
    Ok(cells)
}

fn cell_stem(alpha: f64, seed: u64) -> String {
    format!("alpha{alpha}_seed{seed}")
}

fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut csv = String::from("iteration,best_total,best_cp_minutes,best_co_minutes,cc\n");
    for row in history {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.iteration,
            row.best.total_cost,
            row.best.passenger_cost / 60.0,
            row.best.operator_cost / 60.0,
            row.best.constraint_cost
        )?;
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn write_cells_csv(path: &Path, spec: &RunSpec, cells: &[Cell]) -> Result<()> {
    let mut csv =
        String::from("alpha,seed,status,cp_minutes,co_minutes,cc,total,d0,d1,d2,d_un,feasible,wall_secs\n");
    let co_scale = if spec.double_co { 2.0 } else { 1.0 };
    for c in cells {
        match &c.outcome {
            Ok(run) => {
                let r = &run.result;
                writeln!(
                    csv,
                    "{},{},ok,{},{},{},{},{},{},{},{},{},{:.3}",
                    c.alpha,
                    c.seed,
                    r.passenger_cost / 60.0,
                    r.operator_cost / 60.0 * co_scale,
                    r.constraint_cost,
                    r.total_cost,
                    r.d0,
                    r.d1,
                    r.d2,
                    r.d_un,
                    r.feasible,
                    c.wall_secs
                )?;
            }
            Err(_) => {
                writeln!(csv, "{},{},error,,,,,,,,,,{:.3}", c.alpha, c.seed, c.wall_secs)?;
            }
        }
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_aggregate_csv(path: &Path, spec: &RunSpec, cells: &[Cell]) -> Result<()> {
    let mut csv = String::from(
        "alpha,runs,feasible_runs,mean_cp_minutes,std_cp_minutes,mean_co_minutes,std_co_minutes,mean_total,std_total,mean_buses,mean_daily_cost\n",
    );
    let co_scale = if spec.double_co { 2.0 } else { 1.0 };
    for &alpha in &spec.alphas {
        let runs: Vec<&CellRun> = cells
            .iter()
            .filter(|c| c.alpha == alpha)
            .filter_map(|c| c.outcome.as_ref().ok())
            .collect();
        if runs.is_empty() {
            writeln!(csv, "{alpha},0,0,,,,,,,,")?;
            continue;
        }
        let cp: Vec<f64> = runs.iter().map(|r| r.result.passenger_cost / 60.0).collect();
        let co: Vec<f64> = runs
            .iter()
            .map(|r| r.result.operator_cost / 60.0 * co_scale)
            .collect();
        let total: Vec<f64> = runs.iter().map(|r| r.result.total_cost).collect();
        let feasible = runs.iter().filter(|r| r.result.feasible).count();
        let (cp_m, cp_s) = mean_std(&cp);
        let (co_m, co_s) = mean_std(&co);
        let (t_m, t_s) = mean_std(&total);
        let fleet = match spec.headway_min {
            Some(h) => format!("{},{}", co_m / h, 200.0 * co_m / h),
            None => ",".to_string(),
        };
        writeln!(
            csv,
            "{alpha},{},{feasible},{cp_m},{cp_s},{co_m},{co_s},{t_m},{t_s},{fleet}",
            runs.len()
        )?;
    }
    std::fs::write(path, csv)?;
    Ok(())
}

/// construct / evolve / sweep: the (alpha, seed) grid of optimizer runs.
/// construct stops at the sampled initialization (zero iterations); sweep
/// keeps only the CSVs; evolve writes everything per cell.
pub fn run_grid(spec: &RunSpec) -> Result<Outcome> {
    let out_dir = spec.out_dir.clone().context("this command needs --out-dir")?;
    let city = spec.resolve_city()?;
    let base = city.params;
    let sp = build_shortest_paths(&city);
    let mut ea = spec.ea;
    if spec.command == CommandKind::Construct {
        ea.iterations = 0;
    }
    ea.validate()?;

    spec.echo(&out_dir)?;
    let cells = run_cells(spec, &city, &sp, base, &ea)?;

    let per_cell_files = spec.command != CommandKind::Sweep;
    let mut all_feasible = true;
    let mut any_ok = false;
    for cell in &cells {
        let Ok(run) = &cell.outcome else {
            all_feasible = false;
            continue;
        };
        any_ok = true;
        all_feasible &= run.result.feasible;
        if per_cell_files {
            let stem = cell_stem(cell.alpha, cell.seed);
            run.network.save(&out_dir.join(format!("{stem}_network.json")))?;
            let mut cell_spec = spec.clone();
            cell_spec.alphas = vec![cell.alpha];
            let report = make_report(run.result, &cell_spec, cell.alpha);
            std::fs::write(
                out_dir.join(format!("{stem}_eval.json")),
                serde_json::to_string_pretty(&report)?,
            )?;
            if spec.command == CommandKind::Evolve {
                write_history_csv(&out_dir.join(format!("{stem}_history.csv")), &run.history)?;
                log::info!(
                    "alpha={} seed={}: initial total {:.6} -> best {:.6}",
                    cell.alpha,
                    cell.seed,
                    run.initial.total_cost,
                    run.result.total_cost
                );
            }
        }
    }
    write_cells_csv(&out_dir.join("cells.csv"), spec, &cells)?;
    write_aggregate_csv(&out_dir.join("aggregate.csv"), spec, &cells)?;
    if !any_ok {
        bail!("every run in the batch failed; see the log");
    }
    eprintln!(
        "{} run(s) complete; artifacts in {}",
        cells.len(),
        out_dir.display()
    );
    Ok(if all_feasible { Outcome::Feasible } else { Outcome::Infeasible })
}

pub fn run_eval(spec: &RunSpec) -> Result<Outcome> {
    let net_path = spec.network.clone().context("eval needs --network")?;
    let city = spec.resolve_city()?;
    let net = TransitNetwork::load(&net_path)
        .with_context(|| format!("loading network {}", net_path.display()))?;
    net.validate(&city)?;
    let sp = build_shortest_paths(&city);
    let mut ev = tndp::network::Evaluator::new(&city, &sp, city.params)?;
    let result = ev.eval(&net);
    let report = make_report(result, spec, city.params.alpha);
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &spec.out {
        std::fs::write(out, &json)?;
    }
    let audit = check_constraints(&city, &net, &city.params);
    eprintln!("{}", audit.describe());
    Ok(if result.feasible { Outcome::Feasible } else { Outcome::Infeasible })
}

pub fn execute(spec: &RunSpec) -> Result<Outcome> {
    spec.validate()?;
    match spec.command {
        CommandKind::GenCity => run_gen_city(spec),
        CommandKind::Construct | CommandKind::Evolve | CommandKind::Sweep => run_grid(spec),
        CommandKind::Eval => run_eval(spec),
    }
}
