//! Day-to-day dynamics: choose, simulate, settle, learn, reprice.

mod config;
mod record;
mod welfare;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{generalized_cost, sample_choice, BehaviorError, CostBreakdown};
use crate::market::{min_endowment, settle_consumption, MarketError, MarketState, Scheme};
use crate::mfd::{fictional_travel_time, simulate_day, MfdError, SpeedFunction};
use crate::population::{generate_population, PopulationError, Traveler};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

pub use config::{
    BehaviorConfig, MarketConfig, NetworkConfig, RunConfig, ScenarioConfig, DEFAULT_CHOICE_SCALE,
};
pub use record::{DayMetrics, DayRecord, Histogram, HISTOGRAM_BIN};
pub use welfare::{welfare, Welfare};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Mfd(#[from] MfdError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub fn is_gridlock(&self) -> bool {
        matches!(self, EngineError::Mfd(MfdError::Gridlock { .. }))
    }
}

/// Persisted engine state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub version: u32,
    pub n_travelers: usize,
    pub window_len: usize,
    /// Next day to run.
    pub day: u32,
    pub price: T,
    pub clamps: u32,
    pub seed: u64,
    /// Row-major `n_travelers x window_len` perceived costs.
    pub perceptions: Option<Vec<T>>,
}

impl<T: Scalar> Snapshot<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EngineError> {
        let snap: Self = serde_json::from_str(s).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(EngineError::Snapshot(format!(
                "version {} not supported (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, EngineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), EngineError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// How a snapshot is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumeMode {
    /// Resume exactly where the snapshot left off.
    Continue,
    /// Keep only the perceptions; price and day counter start fresh.
    WarmStart,
}

pub struct Engine<T: Scalar> {
    config: ScenarioConfig<T>,
    travelers: Arc<Vec<Traveler<T>>>,
    lengths: Vec<T>,
    speed: SpeedFunction<T>,
    market: MarketState<T>,
    window_len: usize,
    perceptions: Option<Vec<T>>,
    day: u32,
}

impl<T: Scalar> Engine<T> {
    /// Validates the config and draws the population.
    pub fn new(config: ScenarioConfig<T>) -> Result<Self, EngineError> {
        config.validate()?;
        let speed = config.speed()?;
        let travelers = generate_population(&config.population, speed.free_flow)?;
        Self::with_population(config, Arc::new(travelers))
    }

    /// Uses an existing population, e.g. one shared between scenarios.
    pub fn with_population(config: ScenarioConfig<T>, travelers: Arc<Vec<Traveler<T>>>) -> Result<Self, EngineError> {
        config.validate()?;
        let speed = config.speed()?;
        let window_len = travelers.first().map_or(0, |t| t.window.len());
        if travelers.is_empty() || travelers.iter().any(|t| t.window.len() != window_len || window_len == 0) {
            return Err(EngineError::Config {
                field: "population".into(),
                message: "travelers must be nonempty and share one window size".into(),
            });
        }
        let m = &config.market;
        let market = MarketState::new(m.initial_price, m.endowment, m.adjustment_rate)?;
        Ok(Engine {
            lengths: travelers.iter().map(|t| t.trip_length).collect(),
            config,
            travelers,
            speed,
            market,
            window_len,
            perceptions: None,
            day: 0,
        })
    }

    /// Builds an engine from a snapshot taken on the same population.
    pub fn restore(
        config: ScenarioConfig<T>,
        travelers: Arc<Vec<Traveler<T>>>,
        snapshot: &Snapshot<T>,
        mode: ResumeMode,
    ) -> Result<Self, EngineError> {
        let mut engine = Self::with_population(config, travelers)?;
        engine.apply_snapshot(snapshot, mode)?;
        Ok(engine)
    }

    pub fn apply_snapshot(&mut self, snapshot: &Snapshot<T>, mode: ResumeMode) -> Result<(), EngineError> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(EngineError::Snapshot(format!("unsupported version {}", snapshot.version)));
        }
        let n = self.travelers.len();
        if snapshot.n_travelers != n || snapshot.window_len != self.window_len {
            return Err(EngineError::Snapshot(format!(
                "shape {}x{} does not match population {}x{}",
                snapshot.n_travelers, snapshot.window_len, n, self.window_len
            )));
        }
        if let Some(p) = &snapshot.perceptions {
            if p.len() != n * self.window_len {
                return Err(EngineError::Snapshot(format!("{} perceptions for {}x{}", p.len(), n, self.window_len)));
            }
        }
        self.perceptions = snapshot.perceptions.clone();
        match mode {
            ResumeMode::Continue => {
                self.day = snapshot.day;
                self.market.price = snapshot.price;
                self.market.clamps = snapshot.clamps;
            }
            ResumeMode::WarmStart => {
                self.day = if self.perceptions.is_some() { 1 } else { 0 };
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot<T> {
        Snapshot {
            version: SNAPSHOT_VERSION,
            n_travelers: self.travelers.len(),
            window_len: self.window_len,
            day: self.day,
            price: self.market.price,
            clamps: self.market.clamps,
            seed: self.config.seed,
            perceptions: self.perceptions.clone(),
        }
    }

    pub fn config(&self) -> &ScenarioConfig<T> {
        &self.config
    }

    pub fn travelers(&self) -> &Arc<Vec<Traveler<T>>> {
        &self.travelers
    }

    pub fn speed(&self) -> &SpeedFunction<T> {
        &self.speed
    }

    pub fn market(&self) -> &MarketState<T> {
        &self.market
    }

    /// Next day to run.
    pub fn day(&self) -> u32 {
        self.day
    }

    /// Perceived costs of traveler `i`, once they exist.
    pub fn perception(&self, i: usize) -> Option<&[T]> {
        let w = self.window_len;
        self.perceptions.as_ref().map(|p| &p[i * w..(i + 1) * w])
    }

    /// Per-capita credits needed at everyone's cheapest slot, for credit schemes.
    pub fn min_endowment(&self) -> Option<T> {
        match &self.config.toll {
            Some(p) if p.scheme().uses_credits() => Some(min_endowment(&self.travelers, p, self.speed.free_flow)),
            _ => None,
        }
    }

    pub fn run_day(&mut self) -> Result<DayRecord<T>, EngineError> {
        let day = self.day;
        let w = self.window_len;
        let n = self.travelers.len();
        let mu = self.config.behavior.choice_scale;
        let seed = self.config.seed;
        let travelers = &self.travelers;

        let picks: Vec<(usize, T)> = match &self.perceptions {
            None => vec![(w / 2, T::zero()); n],
            Some(p) => p
                .par_chunks(w)
                .enumerate()
                .map(|(i, row)| {
                    let mut rng = stream(seed, Purpose::Choice, i as u64, day as u64);
                    sample_choice(row, mu, &mut rng)
                })
                .collect(),
        };
        let departures: Vec<T> = picks.iter().zip(travelers.iter()).map(|(&(k, _), t)| t.window[k]).collect();
        let trajectory = simulate_day(&departures, &self.lengths, &self.speed)?;

        let price = self.market.price;
        let toll = self.config.toll.as_ref();
        let scheme = self.config.scheme();
        let mut experienced = vec![T::zero(); n * w];
        let chosen: Vec<CostBreakdown<T>> = experienced
            .par_chunks_mut(w)
            .zip(travelers.par_iter())
            .enumerate()
            .map(|(i, (row, tr))| {
                let k = picks[i].0;
                let mut mine = CostBreakdown::default();
                for (j, slot) in row.iter_mut().enumerate() {
                    let t = tr.window[j];
                    let tt = if j == k {
                        trajectory.travel_times[i]
                    } else {
                        fictional_travel_time(&trajectory, t, tr.trip_length)
                    };
                    let c = generalized_cost(tr, t, tt, price, toll);
                    *slot = c.total;
                    if j == k {
                        mine = c;
                    }
                }
                mine
            })
            .collect();

        let (inconsistency, gap) = match &self.perceptions {
            None => (None, None),
            Some(p) => {
                let mut diff = T::zero();
                let mut norm = T::zero();
                for (row_p, row_c) in p.chunks(w).zip(experienced.chunks(w)) {
                    for (&a, &b) in row_p.iter().zip(row_c) {
                        diff = diff + (a - b).abs();
                        norm = norm + a.abs();
                    }
                }
                (Some(diff / T::from_usize_lossy(n)), Some(diff / norm * T::lit(100.0)))
            }
        };

        let (transactions, excess) = match toll {
            Some(profile) if scheme.uses_credits() => {
                let consumption: Vec<T> = (0..n)
                    .map(|i| profile.charge(departures[i], self.lengths[i], trajectory.travel_times[i]))
                    .collect();
                let (tx, z) = settle_consumption(&consumption, self.market.endowment, price);
                (Some(tx), z)
            }
            _ => (None, T::zero()),
        };
        let epsilon: Vec<T> = picks.iter().map(|&(_, e)| e).collect();
        let welfare = welfare(&chosen, &epsilon, transactions.as_ref(), scheme);

        let omega = self.config.behavior.learning_rate;
        match &mut self.perceptions {
            None => self.perceptions = Some(experienced),
            Some(p) => p
                .par_iter_mut()
                .zip(experienced.par_iter())
                .for_each(|(c_old, &c_new)| *c_old = omega * *c_old + (T::one() - omega) * c_new),
        }
        let next_price = if scheme.uses_credits() { self.market.advance(excess) } else { price };
        self.day += 1;

        Ok(DayRecord {
            day,
            scheme,
            choices: picks.iter().map(|&(k, _)| k as u32).collect(),
            travel_times: trajectory.travel_times.clone(),
            departures,
            costs: chosen,
            epsilon,
            transactions,
            price,
            next_price,
            excess,
            inconsistency,
            gap,
            welfare,
            trajectory,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

/// Mean and spread of every metric over the final days of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub first_day: u32,
    pub last_day: u32,
    pub stats: BTreeMap<String, Stat>,
}

impl EquilibriumSummary {
    pub fn from_days(days: &[DayMetrics]) -> Self {
        let mut stats = BTreeMap::new();
        for (k, name) in DayMetrics::COLUMNS.iter().enumerate() {
            let vals: Vec<f64> = days.iter().map(|d| d.values()[k]).collect();
            stats.insert(name.to_string(), Stat::of(&vals));
        }
        EquilibriumSummary {
            first_day: days.first().map_or(0, |d| d.day),
            last_day: days.last().map_or(0, |d| d.day),
            stats,
        }
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.stats.get(metric).map_or(f64::NAN, |s| s.mean)
    }

    pub fn std(&self, metric: &str) -> f64 {
        self.stats.get(metric).map_or(f64::NAN, |s| s.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub scheme: Scheme,
    pub converged: bool,
    /// Day on which the stopping rule was met.
    pub converged_day: Option<u32>,
    pub days: Vec<DayMetrics>,
    pub summary: EquilibriumSummary,
    pub min_endowment: Option<f64>,
}

/// Runs until the gap stays below the threshold for `stable_days` days in a
/// row (with at least `summary_days` days carrying metrics) or `max_days`
/// days have run. `on_day` sees every full record.
pub fn run_to_convergence<T: Scalar>(
    engine: &mut Engine<T>,
    mut on_day: impl FnMut(&DayRecord<T>, &Engine<T>),
) -> Result<RunOutcome, EngineError> {
    let run = engine.config.run.clone();
    let threshold = run.gap_threshold.to_f64().unwrap_or(f64::NAN);
    let i_min = engine.min_endowment().and_then(|v| v.to_f64());
    if let Some(i_min) = i_min {
        let endowment = engine.config.market.endowment.to_f64().unwrap_or(f64::NAN);
        if endowment <= i_min {
            log::warn!("endowment {endowment} does not exceed the minimum {i_min:.3}; the price may not settle");
        }
    }
    let mut days = Vec::new();
    let mut streak = 0u32;
    let mut converged_day = None;
    for _ in 0..run.max_days {
        let record = engine.run_day()?;
        on_day(&record, engine);
        let m = record.metrics();
        if let Some(gap) = record.gap {
            days.push(m);
            streak = if gap.to_f64().is_some_and(|g| g < threshold) { streak + 1 } else { 0 };
            if streak >= run.stable_days && days.len() >= run.summary_days as usize {
                converged_day = Some(record.day);
                break;
            }
        }
    }
    let tail = days.len().saturating_sub(run.summary_days as usize);
    let summary = EquilibriumSummary::from_days(&days[tail..]);
    Ok(RunOutcome {
        scheme: engine.config.scheme(),
        converged: converged_day.is_some(),
        converged_day,
        days,
        summary,
        min_endowment: i_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub endowment: f64,
    pub price: Stat,
    pub credit_consumption: Stat,
    pub converged: bool,
}

/// Equilibrium price for each endowment, all runs in parallel on one population.
pub fn sweep_endowment<T: Scalar>(
    config: &ScenarioConfig<T>,
    travelers: Arc<Vec<Traveler<T>>>,
    endowments: &[T],
    start: Option<&Snapshot<T>>,
) -> Result<Vec<SweepPoint>, EngineError> {
    endowments
        .par_iter()
        .map(|&endowment| {
            let mut cfg = config.clone();
            cfg.market.endowment = endowment;
            let mut engine = Engine::with_population(cfg, travelers.clone())?;
            if let Some(s) = start {
                engine.apply_snapshot(s, ResumeMode::WarmStart)?;
            }
            let out = run_to_convergence(&mut engine, |_, _| {})?;
            Ok(SweepPoint {
                endowment: endowment.to_f64().unwrap_or(f64::NAN),
                price: out.summary.stats["price"],
                credit_consumption: out.summary.stats["credit_consumption"],
                converged: out.converged,
            })
        })
        .collect()
}

/// No-toll equilibrium of a scenario, the usual starting state of tolled runs.
#[derive(Debug, Clone)]
pub struct Baseline<T> {
    pub outcome: RunOutcome,
    pub snapshot: Snapshot<T>,
    /// Per-capita credits the scenario's credit toll would charge at the
    /// no-toll equilibrium, over the summary window.
    pub credit_use: Option<Stat>,
}

/// Runs `config` with its toll removed.
pub fn no_toll_baseline<T: Scalar>(
    config: &ScenarioConfig<T>,
    travelers: Arc<Vec<Traveler<T>>>,
) -> Result<Baseline<T>, EngineError> {
    let profile = config.toll.clone().filter(|p| p.scheme().uses_credits());
    let mut cfg = config.clone();
    cfg.toll = None;
    cfg.run.warm_start = None;
    let mut engine = Engine::with_population(cfg, travelers)?;
    let mut usage = Vec::new();
    let outcome = run_to_convergence(&mut engine, |rec, eng| {
        if let (Some(p), Some(_)) = (&profile, rec.gap) {
            let lengths = eng.travelers().iter().map(|t| t.trip_length);
            let total = rec
                .departures
                .iter()
                .zip(&rec.travel_times)
                .zip(lengths)
                .fold(T::zero(), |acc, ((&d, &tt), l)| acc + p.charge(d, l, tt));
            usage.push((total / T::from_usize_lossy(rec.n_travelers())).to_f64().unwrap_or(f64::NAN));
        }
    })?;
    let tail = usage.len().saturating_sub(config.run.summary_days as usize);
    Ok(Baseline {
        outcome,
        snapshot: engine.snapshot(),
        credit_use: profile.map(|_| Stat::of(&usage[tail..])),
    })
}
