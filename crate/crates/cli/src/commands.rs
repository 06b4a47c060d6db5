use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use eicic::baselines::{
    max_rsrp_association, run_baseline, BaselineAssociation, BaselineScheduler, BaselineSpec,
};
use eicic::io;
use eicic::metrics::MetricsReport;
use eicic::solver::{
    bcd_solve, AbsFraction, Association, AssociationSolver, BcdOptions, ScheduleSolver, Solution,
};
use eicic::topology::Tier;
use eicic::{NetworkConfig, Scenario};

use crate::output::{Manifest, RunDir};
use crate::{
    AssociationArg, BaselineArgs, BaselineAssociationArg, Cli, CliError, Command, GlobalArgs,
    ReportArgs, ScenarioArgs, ScheduleArg, SchedulerArg, SolveArgs, SweepArgs,
};

const CONFIG_FILE: &str = "config.toml";
const SOLUTION_FILE: &str = "solution.json";

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate { dump_rates } => generate(g, *dump_rates),
        Command::Solve(args) => solve(g, args),
        Command::Baseline(args) => baseline(g, args),
        Command::Sweep(args) => sweep(g, args),
        Command::Report(args) => report(g, args),
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Prefixes a validation message with the line of the offending key, when
/// the key appears in the file.
fn locate_key(text: &str, msg: &str) -> Option<usize> {
    let key = msg.split_whitespace().next()?;
    let key = key.rsplit('.').next()?;
    text.lines().position(|line| {
        line.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
}

fn read_config(path: &Path) -> Result<NetworkConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config: NetworkConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Err(eicic::Error::Config(msg)) = config.validate() {
        return Err(CliError::Config(match locate_key(&text, &msg) {
            Some(line) => format!("{}:{}: {msg}", path.display(), line + 1),
            None => format!("{}: {msg}", path.display()),
        }));
    }
    Ok(config)
}

fn resolve_config(g: &GlobalArgs) -> Result<NetworkConfig, CliError> {
    let mut config = match &g.config {
        Some(p) => read_config(p)?,
        None => NetworkConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn read_scenario_dir(dir: &Path) -> Result<Scenario, CliError> {
    let config = read_config(&dir.join(CONFIG_FILE))?;
    let topology = io::read_topology(
        open(&dir.join("ues.csv"))?,
        open(&dir.join("enbs.csv"))?,
        &config,
    )?;
    let gains = io::read_gains(open(&dir.join("gains.bin"))?)?;
    Ok(Scenario::from_parts(config, topology, gains)?)
}

fn load_scenario(g: &GlobalArgs, args: &ScenarioArgs) -> Result<Scenario, CliError> {
    match &args.scenario {
        Some(dir) => {
            if g.config.is_some() {
                return Err(CliError::Config(
                    "--config and --scenario are mutually exclusive".into(),
                ));
            }
            let scenario = read_scenario_dir(dir)?;
            if g.seed.is_some_and(|s| s != scenario.config.seed) {
                return Err(CliError::Config(format!(
                    "--seed disagrees with the seed {} of scenario {}",
                    scenario.config.seed,
                    dir.display()
                )));
            }
            Ok(scenario)
        }
        None => Ok(Scenario::generate(&resolve_config(g)?)?),
    }
}

fn out_dir(g: &GlobalArgs) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn manifest<'a>(
    g: &GlobalArgs,
    dir: &RunDir,
    subcommand: &'a str,
    seed: u64,
    options: serde_json::Value,
) -> Manifest<'a> {
    Manifest {
        version: crate::output::VERSION,
        subcommand,
        config_path: g.config.as_ref().map(|p| p.display().to_string()),
        seed,
        output_dir: dir.path().display().to_string(),
        options,
    }
}

fn write_config(dir: &RunDir, config: &NetworkConfig) -> Result<(), CliError> {
    let text = toml::to_string(config)
        .map_err(|e| CliError::Invalid(format!("cannot serialise config: {e}")))?;
    dir.write_text(CONFIG_FILE, &text)
}

fn generate(g: &GlobalArgs, dump_rates: bool) -> Result<(), CliError> {
    let scenario = Scenario::generate(&resolve_config(g)?)?;
    let dir = RunDir::create(&out_dir(g))?;
    write_config(&dir, &scenario.config)?;
    dir.write("ues.csv", |w| Ok(io::write_ues(w, &scenario.topology)?))?;
    dir.write("enbs.csv", |w| {
        Ok(io::write_enbs(w, &scenario.topology, &scenario.config)?)
    })?;
    dir.write("gains.bin", |w| Ok(io::write_gains(w, &scenario.gains)?))?;
    if dump_rates {
        dir.write("rates.csv", |w| {
            Ok(io::write_rates(
                w,
                &scenario.problem.rates,
                &scenario.index,
            )?)
        })?;
    }
    manifest(
        g,
        &dir,
        "generate",
        scenario.config.seed,
        json!({ "dump_rates": dump_rates }),
    )
    .write(&dir)?;
    println!(
        "wrote {} UEs, {} macros, {} picos to {}",
        scenario.topology.num_ues(),
        scenario.topology.num_macros(),
        scenario.topology.num_picos(),
        dir.path().display()
    );
    Ok(())
}

/// Machine-readable result of `solve` and `baseline`.
#[derive(Debug, Serialize, Deserialize)]
struct SolutionSummary {
    scheme: String,
    /// `null` when some UE is starved.
    utility: Option<f64>,
    beta: f64,
    converged: bool,
    iterations: usize,
    upper_bound: Option<f64>,
    starved: Vec<usize>,
    num_ues: usize,
    num_enbs: usize,
    num_rbs: usize,
}

fn write_solution(
    dir: &RunDir,
    scenario: &Scenario,
    sol: &Solution,
    scheme: &str,
) -> Result<(), CliError> {
    let problem = &scenario.problem;
    write_config(dir, &scenario.config)?;
    dir.write("association.csv", |w| {
        Ok(io::write_association(w, &sol.association, &problem.kinds)?)
    })?;
    dir.write("shares.csv", |w| Ok(io::write_shares(w, &sol.allocation)?))?;
    dir.write("trace.csv", |w| Ok(io::write_trace(w, &sol.trace)?))?;
    dir.write_json(
        SOLUTION_FILE,
        &SolutionSummary {
            scheme: scheme.to_string(),
            utility: finite(sol.utility),
            beta: sol.beta.value(),
            converged: sol.converged,
            iterations: sol.trace.len(),
            upper_bound: sol.upper_bound,
            starved: sol.starved.clone(),
            num_ues: problem.num_ues(),
            num_enbs: problem.num_enbs(),
            num_rbs: problem.num_rbs(),
        },
    )
}

fn solve(g: &GlobalArgs, args: &SolveArgs) -> Result<(), CliError> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::Config(format!(
            "--tol must be non-negative, got {}",
            args.tol
        )));
    }
    let scenario = load_scenario(g, &args.scenario)?;
    let options = BcdOptions {
        max_iters: args.max_iters,
        utility_tol: args.tol,
        association_solver: match args.association {
            AssociationArg::Heuristic => AssociationSolver::Heuristic,
            AssociationArg::Relaxed => AssociationSolver::RelaxedRounded,
        },
        schedule_solver: match args.schedule {
            ScheduleArg::Closed => ScheduleSolver::ClosedForm,
            ScheduleArg::Pf => ScheduleSolver::PfNumeric,
        },
        compute_upper_bound: args.upper_bound
            || matches!(args.association, AssociationArg::Relaxed),
        ..BcdOptions::default()
    };
    let init = max_rsrp_association(&scenario.rsrp, &scenario.topology, &scenario.index).serving();
    let sol = bcd_solve(&scenario.problem, &init, &options)?;
    sol.allocation.check_feasible(&sol.association, sol.beta)?;

    let dir = RunDir::create(&out_dir(g))?;
    write_solution(&dir, &scenario, &sol, "joint")?;
    manifest(
        g,
        &dir,
        "solve",
        scenario.config.seed,
        json!({
            "scenario": args.scenario.scenario.as_ref().map(|p| p.display().to_string()),
            "max_iters": args.max_iters,
            "tol": args.tol,
            "association": args.association,
            "schedule": args.schedule,
            "upper_bound": options.compute_upper_bound,
        }),
    )
    .write(&dir)?;
    println!(
        "utility {:.6} beta {:.6} iterations {} converged {}{}",
        sol.utility,
        sol.beta.value(),
        sol.trace.len(),
        sol.converged,
        sol.upper_bound
            .map(|b| format!(" upper_bound {b:.6}"))
            .unwrap_or_default()
    );
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(args.max_iters))
    }
}

fn scheduler(arg: SchedulerArg) -> BaselineScheduler {
    match arg {
        SchedulerArg::Pf => BaselineScheduler::Pf,
        SchedulerArg::Rr => BaselineScheduler::RoundRobin,
    }
}

fn checked(spec: BaselineSpec) -> Result<BaselineSpec, CliError> {
    spec.validate().map_err(|e| match e {
        eicic::Error::Config(msg) => CliError::Config(msg),
        other => other.into(),
    })?;
    Ok(spec)
}

fn baseline(g: &GlobalArgs, args: &BaselineArgs) -> Result<(), CliError> {
    let association = match args.association {
        BaselineAssociationArg::MaxRsrp if args.bias_db != 0.0 => {
            return Err(CliError::Config(
                "--bias-db requires --association biased".into(),
            ));
        }
        BaselineAssociationArg::MaxRsrp => BaselineAssociation::MaxRsrp,
        BaselineAssociationArg::Biased => BaselineAssociation::BiasedRsrp {
            bias_db: args.bias_db,
        },
    };
    let spec = checked(BaselineSpec {
        association,
        beta: args.beta,
        scheduler: scheduler(args.scheduler),
    })?;
    let scenario = load_scenario(g, &args.scenario)?;
    let sol = run_baseline(&spec, &scenario)?;
    sol.allocation.check_feasible(&sol.association, sol.beta)?;

    let dir = RunDir::create(&out_dir(g))?;
    write_solution(&dir, &scenario, &sol, "baseline")?;
    manifest(
        g,
        &dir,
        "baseline",
        scenario.config.seed,
        json!({
            "scenario": args.scenario.scenario.as_ref().map(|p| p.display().to_string()),
            "association": args.association,
            "bias_db": args.bias_db,
            "beta": args.beta,
            "scheduler": args.scheduler,
        }),
    )
    .write(&dir)?;
    println!(
        "utility {:.6} beta {:.6} starved {}",
        sol.utility,
        sol.beta.value(),
        sol.starved.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    seed: u64,
    bias_db: f64,
    beta: f64,
    utility: f64,
    jain_index: Option<f64>,
    macro_avg_load: f64,
    pico_avg_load: f64,
    num_starved: usize,
}

fn sweep(g: &GlobalArgs, args: &SweepArgs) -> Result<(), CliError> {
    let specs: Vec<BaselineSpec> = args
        .bias_grid
        .iter()
        .flat_map(|&bias_db| {
            args.beta_grid.iter().map(move |&beta| BaselineSpec {
                association: BaselineAssociation::BiasedRsrp { bias_db },
                beta,
                scheduler: scheduler(args.scheduler),
            })
        })
        .map(checked)
        .collect::<Result<_, _>>()?;
    if specs.is_empty() {
        return Err(CliError::Config("empty sweep grid".into()));
    }

    let scenarios: Vec<Scenario> = if args.seeds.is_empty() {
        vec![load_scenario(g, &args.scenario)?]
    } else {
        if args.scenario.scenario.is_some() {
            return Err(CliError::Config(
                "--seeds cannot be combined with --scenario".into(),
            ));
        }
        let base = resolve_config(g)?;
        args.seeds
            .iter()
            .map(|&seed| {
                Scenario::generate(&NetworkConfig {
                    seed,
                    ..base.clone()
                })
            })
            .collect::<Result<_, _>>()?
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for scenario in &scenarios {
        let seed = scenario.config.seed;
        let cells: Vec<SweepRow> = specs
            .par_iter()
            .map(|spec| {
                let sol = run_baseline(spec, scenario)?;
                let m = MetricsReport::compute(
                    &sol,
                    &scenario.problem,
                    &scenario.index,
                    scenario.rb_bandwidth(),
                );
                let load = eicic::metrics::per_tier_load(&sol.association, &scenario.index);
                let bias_db = match spec.association {
                    BaselineAssociation::BiasedRsrp { bias_db } => bias_db,
                    BaselineAssociation::MaxRsrp => 0.0,
                };
                Ok(SweepRow {
                    seed,
                    bias_db,
                    beta: spec.beta,
                    utility: sol.utility,
                    jain_index: m.ok().map(|m| m.jain_index),
                    macro_avg_load: load.macro_avg,
                    pico_avg_load: load.pico_avg,
                    num_starved: sol.starved.len(),
                })
            })
            .collect::<Result<_, CliError>>()?;
        let best = cells
            .iter()
            .max_by(|a, b| a.utility.total_cmp(&b.utility))
            .expect("nonempty grid");
        let init =
            max_rsrp_association(&scenario.rsrp, &scenario.topology, &scenario.index).serving();
        let joint = bcd_solve(
            &scenario.problem,
            &init,
            &BcdOptions {
                schedule_solver: ScheduleSolver::PfNumeric,
                ..BcdOptions::default()
            },
        )?;
        summaries.push(json!({
            "seed": seed,
            "best_bias_db": best.bias_db,
            "best_beta": best.beta,
            "best_utility": finite(best.utility),
            "joint_utility": finite(joint.utility),
            "joint_beta": joint.beta.value(),
            "joint_converged": joint.converged,
        }));
        println!(
            "seed {seed}: best cell ({} dB, beta {}) utility {:.6}; joint utility {:.6}",
            best.bias_db, best.beta, best.utility, joint.utility
        );
        rows.extend(cells);
    }

    let dir = RunDir::create(&out_dir(g))?;
    write_config(&dir, &scenarios[0].config)?;
    dir.write("sweep.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in &rows {
            out.serialize(row).map_err(eicic::Error::from)?;
        }
        out.flush().map_err(|e| CliError::io("sweep.csv", e))
    })?;
    dir.write_json("sweep_summary.json", &summaries)?;
    manifest(
        g,
        &dir,
        "sweep",
        scenarios[0].config.seed,
        json!({
            "scenario": args.scenario.scenario.as_ref().map(|p| p.display().to_string()),
            "bias_grid": args.bias_grid,
            "beta_grid": args.beta_grid,
            "scheduler": args.scheduler,
            "seeds": scenarios.iter().map(|s| s.config.seed).collect::<Vec<_>>(),
        }),
    )
    .write(&dir)
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    ue_id: usize,
    serving_enb: usize,
    tier: &'static str,
    throughput_bps: f64,
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    jain_index: f64,
    utility: Option<f64>,
    macro_utility: Option<f64>,
    pico_utility: Option<f64>,
    beta: f64,
    macro_avg_load: f64,
    pico_avg_load: f64,
    num_ues: usize,
    num_starved: usize,
}

fn report(g: &GlobalArgs, args: &ReportArgs) -> Result<(), CliError> {
    let input = &args.input;
    let summary: SolutionSummary = serde_json::from_reader(open(&input.join(SOLUTION_FILE))?)?;
    let scenario = match &args.scenario.scenario {
        Some(dir) => read_scenario_dir(dir)?,
        None => Scenario::generate(&read_config(&input.join(CONFIG_FILE))?)?,
    };
    let problem = &scenario.problem;
    if (summary.num_ues, summary.num_enbs, summary.num_rbs)
        != (problem.num_ues(), problem.num_enbs(), problem.num_rbs())
    {
        return Err(CliError::Invalid(format!(
            "{} does not match the scenario dimensions",
            input.join(SOLUTION_FILE).display()
        )));
    }
    let serving = io::read_association(open(&input.join("association.csv"))?, &problem.kinds)?;
    if serving.len() != problem.num_ues() {
        return Err(CliError::Invalid(
            "association.csv has the wrong number of UEs".into(),
        ));
    }
    let association = Association::from_serving(problem.num_enbs(), &serving);
    association.validate(&problem.eligibility)?;
    let allocation = io::read_shares(
        open(&input.join("shares.csv"))?,
        problem.num_ues(),
        problem.num_enbs(),
        problem.num_rbs(),
    )?;
    let beta = AbsFraction::new(summary.beta)?;
    allocation.check_feasible(&association, beta)?;
    let trace = io::read_trace(open(&input.join("trace.csv"))?)?;
    let sol = Solution {
        association,
        beta,
        allocation,
        utility: summary.utility.unwrap_or(f64::NEG_INFINITY),
        trace,
        converged: summary.converged,
        starved: summary.starved.clone(),
        upper_bound: summary.upper_bound,
    };
    let m = MetricsReport::compute(&sol, problem, &scenario.index, scenario.rb_bandwidth())?;
    let consistent = match summary.utility {
        Some(u) => (m.system_utility - u).abs() <= 1e-9 * u.abs().max(1.0),
        None => !m.system_utility.is_finite(),
    };
    if !consistent {
        return Err(CliError::Invalid(format!(
            "recomputed utility {} disagrees with stored utility {:?}",
            m.system_utility, summary.utility
        )));
    }

    let dir = RunDir::create(&g.out.clone().unwrap_or_else(|| input.join("report")))?;
    dir.write("metrics.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        for (u, (&b, &t)) in serving.iter().zip(&m.per_ue_throughput).enumerate() {
            let tier = match problem.kinds[b].tier() {
                Tier::Macro => "macro",
                Tier::Pico => "pico",
            };
            out.serialize(MetricsRow {
                ue_id: u,
                serving_enb: b,
                tier,
                throughput_bps: t,
            })
            .map_err(eicic::Error::from)?;
        }
        out.flush().map_err(|e| CliError::io("metrics.csv", e))
    })?;
    dir.write("cdf.csv", |w| {
        writeln!(w, "throughput_bps,fraction").map_err(|e| CliError::io("cdf.csv", e))?;
        for (t, f) in &m.cdf_points {
            writeln!(w, "{t},{f}").map_err(|e| CliError::io("cdf.csv", e))?;
        }
        Ok(())
    })?;
    dir.write_json(
        "summary.json",
        &ReportSummary {
            jain_index: m.jain_index,
            utility: finite(m.system_utility),
            macro_utility: finite(m.macro_utility),
            pico_utility: finite(m.pico_utility),
            beta: m.beta,
            macro_avg_load: m.load.macro_avg,
            pico_avg_load: m.load.pico_avg,
            num_ues: problem.num_ues(),
            num_starved: m.num_starved,
        },
    )?;
    manifest(
        g,
        &dir,
        "report",
        scenario.config.seed,
        json!({
            "input": input.display().to_string(),
            "scenario": args.scenario.scenario.as_ref().map(|p| p.display().to_string()),
        }),
    )
    .write(&dir)?;
    println!(
        "jain {:.6} utility {:.6} pico load {:.3} macro load {:.3}",
        m.jain_index, m.system_utility, m.load.pico_avg, m.load.macro_avg
    );
    Ok(())
}
