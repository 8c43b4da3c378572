use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tcs_bayesopt::{optimize as bo_optimize, Bounds, OptimizeOptions, Phase, TraceEntry};
use tcs_core::day2day::{
    no_toll_baseline, run_to_convergence, sweep_endowment, Baseline, Engine, ResumeMode, RunOutcome, SweepPoint,
};
use tcs_core::market::Scheme;
use tcs_core::population::generate_population;
use tcs_core::tuning::TuningProblem;
use tcs_core::{DayTrajectory, ScenarioConfig, Snapshot, TollProfile, Traveler};

use crate::config::{self, LoadedConfig, Overrides};
use crate::output::{self, DaysCsv, RunManifest, StatJson, Summary, SCHEMA_VERSION};
use crate::CliError;

type Population = Arc<Vec<Traveler>>;

pub fn population(cfg: &ScenarioConfig) -> Result<Population, CliError> {
    let speed = cfg.speed()?;
    Ok(Arc::new(generate_population(&cfg.population, speed.free_flow).map_err(tcs_core::day2day::EngineError::from)?))
}

fn baseline(cfg: &ScenarioConfig, travelers: &Population) -> Result<Baseline<f64>, CliError> {
    log::info!("{}: running the no-toll baseline", cfg.name);
    let b = no_toll_baseline(cfg, travelers.clone())?;
    if !b.outcome.converged {
        log::warn!("{}: no-toll baseline did not converge", cfg.name);
    }
    Ok(b)
}

/// Starting state from the config's snapshot path, if any.
fn configured_start(cfg: &ScenarioConfig) -> Result<Option<Snapshot>, CliError> {
    match &cfg.run.warm_start {
        Some(p) => Ok(Some(Snapshot::read(p).map_err(|e| CliError::Config(format!("run.warm_start: {e}")))?)),
        None => Ok(None),
    }
}

struct ScenarioRun {
    outcome: RunOutcome,
}

/// Runs one scenario and writes `days.csv`, the selected day files and the
/// final state into `dir`.
fn run_scenario(
    cfg: &ScenarioConfig,
    travelers: Population,
    start: Option<&Snapshot>,
    dir: &Path,
    save_days: &BTreeSet<u32>,
    quiet: bool,
) -> Result<ScenarioRun, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut engine = Engine::with_population(cfg.clone(), travelers)?;
    if let Some(s) = start {
        engine.apply_snapshot(s, ResumeMode::WarmStart)?;
    }
    if let Some(toll) = &cfg.toll {
        let p = &cfg.population;
        let lo = p.departure.lower - p.dt * p.tau as f64;
        let hi = p.departure.upper + p.dt * p.tau as f64;
        toll.write_curve_csv(lo, hi, p.dt, output::create(&dir.join("toll_curve.csv"))?)?;
    }
    let mut days = DaysCsv::create(&dir.join("days.csv"))?;
    let mut failure: Option<CliError> = None;
    let mut last: Option<(u32, DayTrajectory, tcs_core::day2day::Histogram)> = None;
    let name = cfg.name.clone();
    let result = run_to_convergence(&mut engine, |rec, _| {
        if failure.is_some() {
            return;
        }
        let m = rec.metrics();
        if !quiet {
            log::info!(
                "{name} day {:>3}: gap {:>8.4}% price {:.4} W {:.3}",
                m.day,
                m.gap,
                m.price,
                m.social_welfare
            );
        }
        let mut step = || -> Result<(), CliError> {
            days.push(&m)?;
            if save_days.contains(&rec.day) {
                write_day_files(dir, rec.day, &rec.trajectory, &rec.departure_histogram())?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
        last = Some((rec.day, rec.trajectory.clone(), rec.departure_histogram()));
    });
    days.finish()?;
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = result?;
    if let Some((day, traj, hist)) = &last {
        if !save_days.contains(day) {
            write_day_files(dir, *day, traj, hist)?;
        }
    }
    engine.snapshot().write(&dir.join("state.snapshot"))?;
    Ok(ScenarioRun { outcome })
}

fn write_day_files(
    dir: &Path,
    day: u32,
    traj: &DayTrajectory,
    hist: &tcs_core::day2day::Histogram,
) -> Result<(), CliError> {
    let mut a = output::create(&dir.join(format!("accumulation_d{day:03}.csv")))?;
    traj.write_accumulation_csv(&mut a)?;
    a.flush()?;
    let mut d = output::create(&dir.join(format!("departures_d{day:03}.csv")))?;
    hist.write_csv(&mut d)?;
    d.flush()?;
    Ok(())
}

/// Reads a toll profile from either a bare profile or a `best.json`.
pub fn read_toll(path: &Path) -> Result<TollProfile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let inner = value.get("toll").cloned().unwrap_or(value);
    let toll: TollProfile =
        serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: toll: {e}", path.display())))?;
    toll.validate().map_err(|e| CliError::Config(format!("{}: toll: {e}", path.display())))?;
    Ok(toll)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: String,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub toll: Option<PathBuf>,
    pub from_no_toll: bool,
    pub save_days: Vec<u32>,
    pub quiet: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<Summary, CliError> {
    let mut cfg = config::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    if let Some(p) = &args.toll {
        cfg.scenario.toll = Some(read_toll(p)?);
        cfg.scenario.validate()?;
    }
    let manifest = RunManifest::begin("simulate", config::config_hash(&cfg)?, cfg.scenario.seed);
    std::fs::create_dir_all(&args.out)?;
    let travelers = population(&cfg.scenario)?;
    let mut start = configured_start(&cfg.scenario)?;
    let mut credit_use = None;
    if args.from_no_toll {
        let b = baseline(&cfg.scenario, &travelers)?;
        credit_use = b.credit_use;
        start = Some(b.snapshot);
    }
    let save: BTreeSet<u32> = args.save_days.iter().copied().collect();
    let run = run_scenario(&cfg.scenario, travelers, start.as_ref(), &args.out, &save, args.quiet)?;
    let summary = Summary::new(&cfg.scenario.name, &run.outcome, credit_use);
    output::write_json(&args.out.join("summary.json"), &summary)?;
    manifest.finish(&args.out)?;
    if !summary.converged {
        return Err(CliError::NotConverged(format!(
            "{} after {} days",
            cfg.scenario.name, cfg.scenario.run.max_days
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeArgs {
    pub config: String,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestToll {
    pub schema_version: u32,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub welfare: f64,
    pub evaluations: usize,
    pub synthetic: bool,
    pub toll: TollProfile,
}

pub fn optimize(args: &OptimizeArgs) -> Result<BestToll, CliError> {
    let mut cfg = config::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    let opt = cfg
        .optimize
        .clone()
        .ok_or_else(|| CliError::Config(format!("{}: missing [optimize] table", cfg.origin)))?;
    let manifest = RunManifest::begin("optimize", config::config_hash(&cfg)?, cfg.scenario.seed);
    std::fs::create_dir_all(&args.out)?;

    let family = opt.family();
    let names = family.param_names();
    let bounds = Bounds::from_pairs(&opt.bounds()).map_err(|e| CliError::Config(format!("optimize.bounds: {e}")))?;
    let options = OptimizeOptions {
        n_init: opt.n_init,
        n_iter: opt.n_iter,
        beta: opt.beta,
        seed: opt.seed,
        ..OptimizeOptions::default()
    };

    let mut trace = csv::Writer::from_writer(output::create(&args.out.join("trace.csv"))?);
    let mut header = vec!["iteration".to_string(), "phase".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(["welfare", "acquisition", "best", "error"].map(String::from));
    trace.write_record(&header)?;
    trace.flush()?;
    let mut write_err: Option<CliError> = None;
    let quiet = args.quiet;
    let observer = |e: &TraceEntry<f64>| {
        let mut row = vec![
            e.iteration.to_string(),
            match e.phase {
                Phase::Design => "design".to_string(),
                Phase::Acquisition => "ucb".to_string(),
            },
        ];
        row.extend(e.params.iter().map(|v| v.to_string()));
        row.push(e.value.to_string());
        row.push(e.acquisition.map_or(String::new(), |a| a.to_string()));
        row.push(e.best.to_string());
        row.push(e.error.clone().unwrap_or_default());
        if let Err(err) = trace.write_record(&row).and_then(|_| trace.flush().map_err(csv::Error::from)) {
            write_err.get_or_insert(err.into());
        }
        if !quiet {
            log::info!("iteration {:>3}: value {:.4} best {:.4} at {:?}", e.iteration, e.value, e.best, e.params);
        }
    };

    let problem;
    let result = match &opt.synthetic_optimum {
        Some(x0) => {
            let x0 = x0.clone();
            let widths: Vec<f64> = (0..bounds.dim()).map(|d| bounds.width(d)).collect();
            let objective = move |x: &[f64]| -> Result<f64, String> {
                Ok(-x.iter().zip(&x0).zip(&widths).map(|((a, b), w)| ((a - b) / w).powi(2)).sum::<f64>())
            };
            bo_optimize(objective, &bounds, &options, observer)
        }
        None => {
            let travelers = population(&cfg.scenario)?;
            let start = if opt.from_no_toll {
                Some(baseline(&cfg.scenario, &travelers)?.snapshot)
            } else {
                configured_start(&cfg.scenario)?
            };
            problem = TuningProblem {
                base: cfg.scenario.clone(),
                travelers,
                family,
                basis: opt.basis,
                denomination: opt.denomination,
                bounds: bounds.clone(),
                start,
                penalize_nonconvergence: opt.penalize_nonconvergence,
                skip_infeasible: opt.skip_infeasible,
            };
            problem.optimize(&options, observer)
        }
    }
    .map_err(|e| CliError::Other(format!("optimization failed: {e}")))?;
    if let Some(e) = write_err {
        return Err(e);
    }
    drop(trace);

    let shape = family.shape(&result.best_params);
    let toll = match opt.denomination {
        tcs_core::market::Denomination::Credits => TollProfile::credits(shape, opt.basis),
        tcs_core::market::Denomination::Money => TollProfile::money(shape, opt.basis),
    };
    let best = BestToll {
        schema_version: SCHEMA_VERSION,
        family: format!("{:?}", opt.family).to_lowercase(),
        params: names.iter().map(|n| n.to_string()).zip(result.best_params.iter().copied()).collect(),
        welfare: result.best_value,
        evaluations: result.trace.len(),
        synthetic: opt.synthetic_optimum.is_some(),
        toll,
    };
    output::write_json(&args.out.join("best.json"), &best)?;
    manifest.finish(&args.out)?;
    Ok(best)
}

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub configs: Vec<String>,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub from_no_toll: bool,
    pub quiet: bool,
}

/// Columns of the comparison table, each reported as mean and std.
pub const COMPARE_METRICS: [&str; 9] = [
    "travel_time_cost",
    "schedule_delay",
    "random_utility",
    "consumer_surplus",
    "social_welfare",
    "toll_payment",
    "price",
    "peak_accumulation",
    "gap",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scenario: String,
    pub scheme: Scheme,
    pub converged: bool,
    pub summary: Summary,
}

pub fn compare(args: &CompareArgs) -> Result<Vec<CompareRow>, CliError> {
    if args.configs.len() < 2 {
        return Err(CliError::Config("compare needs at least two configs".into()));
    }
    let mut cfgs: Vec<LoadedConfig> = Vec::new();
    for c in &args.configs {
        let mut cfg = config::load(c)?;
        args.overrides.apply(&mut cfg)?;
        cfgs.push(cfg);
    }
    let first = &cfgs[0].scenario;
    for c in &cfgs[1..] {
        if c.scenario.population != first.population || c.scenario.seed != first.seed {
            return Err(CliError::Config(format!(
                "{}: population or seed differs from {}",
                c.origin, cfgs[0].origin
            )));
        }
    }
    let hashes: Vec<String> = cfgs.iter().map(config::config_hash).collect::<Result<_, _>>()?;
    let manifest = RunManifest::begin("compare", config::canonical_hash(&hashes)?, first.seed);
    std::fs::create_dir_all(&args.out)?;
    let travelers = population(first)?;
    let start = if args.from_no_toll {
        Some(baseline(first, &travelers)?.snapshot)
    } else {
        None
    };

    let dirs: Vec<String> = cfgs
        .iter()
        .enumerate()
        .map(|(k, c)| format!("{:02}-{}", k + 1, sanitize(&c.scenario.name)))
        .collect();
    let runs: Vec<Result<ScenarioRun, CliError>> = cfgs
        .par_iter()
        .zip(dirs.par_iter())
        .map(|(c, d)| {
            let own = configured_start(&c.scenario)?;
            let s = start.as_ref().or(own.as_ref());
            run_scenario(&c.scenario, travelers.clone(), s, &args.out.join(d), &BTreeSet::new(), args.quiet)
        })
        .collect();

    let mut rows = Vec::new();
    for ((c, d), run) in cfgs.iter().zip(&dirs).zip(runs) {
        let run = run?;
        let summary = Summary::new(&c.scenario.name, &run.outcome, None);
        output::write_json(&args.out.join(d).join("summary.json"), &summary)?;
        rows.push(CompareRow {
            scenario: c.scenario.name.clone(),
            scheme: run.outcome.scheme,
            converged: run.outcome.converged,
            summary,
        });
    }

    let mut w = csv::Writer::from_writer(output::create(&args.out.join("compare.csv"))?);
    let mut header = vec!["scenario".to_string(), "scheme".to_string(), "converged".to_string()];
    for m in COMPARE_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.scenario.clone(), r.scheme.label().to_string(), r.converged.to_string()];
        for m in COMPARE_METRICS {
            let s = r.summary.stats.get(m).copied().unwrap_or(StatJson { mean: None, std: None });
            rec.push(s.mean.map_or(String::new(), |v| v.to_string()));
            rec.push(s.std.map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    drop(w);
    manifest.finish(&args.out)?;
    let stuck: Vec<&str> = rows.iter().filter(|r| !r.converged).map(|r| r.scenario.as_str()).collect();
    if !stuck.is_empty() {
        return Err(CliError::NotConverged(stuck.join(", ")));
    }
    Ok(rows)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub config: String,
    pub out: PathBuf,
    pub overrides: Overrides,
    /// Overrides the `[sweep]` table.
    pub endowments: Vec<f64>,
    pub from_no_toll: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub min_endowment: Option<f64>,
    /// Credits used per capita at the no-toll equilibrium.
    pub no_toll_credit_use: Option<StatJson>,
    pub points: Vec<SweepPoint>,
}

pub fn sweep(args: &SweepArgs) -> Result<SweepReport, CliError> {
    let mut cfg = config::load(&args.config)?;
    args.overrides.apply(&mut cfg)?;
    let endowments = if args.endowments.is_empty() {
        cfg.sweep.as_ref().map(|s| s.endowments.clone()).unwrap_or_default()
    } else {
        args.endowments.clone()
    };
    if endowments.is_empty() {
        return Err(CliError::Config("sweep.endowments: no endowments given".into()));
    }
    if !cfg.scenario.scheme().uses_credits() {
        return Err(CliError::Config("toll: sweep needs a credit toll".into()));
    }
    let manifest = RunManifest::begin("sweep", config::config_hash(&cfg)?, cfg.scenario.seed);
    std::fs::create_dir_all(&args.out)?;
    let travelers = population(&cfg.scenario)?;
    let base = baseline(&cfg.scenario, &travelers)?;
    let start = if args.from_no_toll { Some(base.snapshot.clone()) } else { configured_start(&cfg.scenario)? };
    let points = sweep_endowment(&cfg.scenario, travelers.clone(), &endowments, start.as_ref())?;
    let engine = Engine::with_population(cfg.scenario.clone(), travelers)?;

    let mut w = csv::Writer::from_writer(output::create(&args.out.join("sweep.csv"))?);
    w.write_record([
        "endowment",
        "price_mean",
        "price_std",
        "credit_consumption_mean",
        "credit_consumption_std",
        "converged",
    ])?;
    for p in &points {
        w.write_record([
            p.endowment.to_string(),
            p.price.mean.to_string(),
            p.price.std.to_string(),
            p.credit_consumption.mean.to_string(),
            p.credit_consumption.std.to_string(),
            p.converged.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        min_endowment: engine.min_endowment(),
        no_toll_credit_use: base.credit_use.map(StatJson::from),
        points,
    };
    output::write_json(&args.out.join("sweep.json"), &report)?;
    manifest.finish(&args.out)?;
    let stuck: Vec<String> = report.points.iter().filter(|p| !p.converged).map(|p| p.endowment.to_string()).collect();
    if !stuck.is_empty() {
        return Err(CliError::NotConverged(format!("endowments {}", stuck.join(", "))));
    }
    Ok(report)
}
