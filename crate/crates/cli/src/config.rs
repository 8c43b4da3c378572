//! TOML scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tcs_core::day2day::{BehaviorConfig, MarketConfig, NetworkConfig, RunConfig};
use tcs_core::market::{Denomination, TollBasis};
use tcs_core::tuning::ProfileFamily;
use tcs_core::{PopulationSpec, ScenarioConfig, TollProfile};

use crate::CliError;

/// Scenario files shipped with the binary, addressable as `builtin:<name>`.
pub const BUILTIN: &[(&str, &str)] = &[
    ("nte-3700", include_str!("../scenarios/nte-3700.toml")),
    ("nte-4500", include_str!("../scenarios/nte-4500.toml")),
    ("tcs-3700", include_str!("../scenarios/tcs-3700.toml")),
    ("tcs-4500", include_str!("../scenarios/tcs-4500.toml")),
    ("cp-3700", include_str!("../scenarios/cp-3700.toml")),
    ("cp-4500", include_str!("../scenarios/cp-4500.toml")),
    ("tcs-time-4500", include_str!("../scenarios/tcs-time-4500.toml")),
    ("optimize-tcs-3700", include_str!("../scenarios/optimize-tcs-3700.toml")),
    ("optimize-tcs-4500", include_str!("../scenarios/optimize-tcs-4500.toml")),
    ("optimize-cp-3700", include_str!("../scenarios/optimize-cp-3700.toml")),
    ("optimize-cp-4500", include_str!("../scenarios/optimize-cp-4500.toml")),
    ("optimize-triangular-3700", include_str!("../scenarios/optimize-triangular-3700.toml")),
    ("optimize-step-3700", include_str!("../scenarios/optimize-step-3700.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Gaussian,
    Triangular,
    Step,
}

fn default_step_width() -> f64 {
    10.0
}
fn default_n_init() -> usize {
    30
}
fn default_n_iter() -> usize {
    40
}
fn default_beta() -> f64 {
    2.0
}
fn yes() -> bool {
    true
}

/// `[optimize]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default = "default_family")]
    pub family: FamilyName,
    /// Band width in minutes for the step family.
    #[serde(default = "default_step_width")]
    pub step_width: f64,
    #[serde(default)]
    pub basis: TollBasis,
    #[serde(default)]
    pub denomination: Denomination,
    /// One `[lower, upper]` pair per parameter; family defaults otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Start every candidate from the no-toll equilibrium.
    #[serde(default = "yes")]
    pub from_no_toll: bool,
    #[serde(default)]
    pub penalize_nonconvergence: bool,
    /// Reject credit tolls that need more than the endowment.
    #[serde(default = "yes")]
    pub skip_infeasible: bool,
    /// Replace the simulation by `-sum(((x - optimum) / width)^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_optimum: Option<Vec<f64>>,
}

fn default_family() -> FamilyName {
    FamilyName::Gaussian
}

impl OptimizeSection {
    pub fn family(&self) -> ProfileFamily<f64> {
        match self.family {
            FamilyName::Gaussian => ProfileFamily::Gaussian,
            FamilyName::Triangular => ProfileFamily::Triangular,
            FamilyName::Step => ProfileFamily::Step { width: self.step_width },
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match &self.bounds {
            Some(b) => b.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            None => self.family().default_bounds(self.denomination),
        }
    }
}

/// `[sweep]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub endowments: Vec<f64>,
}

/// Mirrors [`ScenarioConfig`] plus the command tables, so that parse errors
/// point at the offending key.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    name: Option<String>,
    seed: u64,
    population: PopulationSpec,
    network: NetworkConfig<f64>,
    behavior: BehaviorConfig<f64>,
    market: MarketConfig<f64>,
    #[serde(default)]
    toll: Option<TollProfile>,
    run: RunConfig<f64>,
    #[serde(default)]
    optimize: Option<OptimizeSection>,
    #[serde(default)]
    sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub scenario: ScenarioConfig,
    pub optimize: Option<OptimizeSection>,
    pub sweep: Option<SweepSection>,
    /// Where the text came from, for messages.
    pub origin: String,
}

/// Loads `builtin:<name>` or a file path. Relative warm-start paths resolve
/// against the file's directory.
pub fn load(source: &str) -> Result<LoadedConfig, CliError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let text = builtin(name).ok_or_else(|| CliError::Config(format!("no bundled scenario `{name}`")))?;
        return parse(text, source, None);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    parse(&text, source, path.parent())
}

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn parse(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let mut run = file.run;
    if let (Some(dir), Some(p)) = (base_dir, &run.warm_start) {
        if p.is_relative() {
            run.warm_start = Some(dir.join(p));
        }
    }
    let scenario = ScenarioConfig {
        name: file.name.unwrap_or_else(|| default_name(origin)),
        seed: file.seed,
        population: file.population,
        network: file.network,
        behavior: file.behavior,
        market: file.market,
        toll: file.toll,
        run,
    };
    scenario.validate().map_err(|e| CliError::Config(format!("{origin}: {}", CliError::from(e))))?;
    if let Some(opt) = &file.optimize {
        let want = opt.family().dim();
        let bounds = opt.bounds();
        if bounds.len() != want {
            return Err(CliError::Config(format!("{origin}: optimize.bounds: {} pairs for {want} parameters", bounds.len())));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(CliError::Config(format!("{origin}: optimize.bounds: lower must be below upper")));
        }
        if opt.synthetic_optimum.as_ref().is_some_and(|x| x.len() != want) {
            return Err(CliError::Config(format!("{origin}: optimize.synthetic_optimum: expected {want} values")));
        }
        if opt.n_init == 0 {
            return Err(CliError::Config(format!("{origin}: optimize.n_init: must be at least 1")));
        }
    }
    Ok(LoadedConfig {
        scenario,
        optimize: file.optimize,
        sweep: file.sweep,
        origin: origin.to_string(),
    })
}

fn default_name(origin: &str) -> String {
    let stem = origin.strip_prefix("builtin:").unwrap_or(origin);
    Path::new(stem)
        .file_stem()
        .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Sets both the choice seed and the population seed.
    pub seed: Option<u64>,
    pub days: Option<u32>,
    pub warm_start: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut LoadedConfig) -> Result<(), CliError> {
        let s = &mut cfg.scenario;
        if let Some(seed) = self.seed {
            s.seed = seed;
            s.population.seed = seed;
        }
        if let Some(days) = self.days {
            s.run.max_days = days;
        }
        if let Some(p) = &self.warm_start {
            s.run.warm_start = Some(p.clone());
        }
        s.validate().map_err(CliError::from)
    }
}

/// SHA-256 of the canonical JSON form of a value. Object keys are sorted,
/// so the digest does not depend on the order keys were written in.
pub fn canonical_hash<S: Serialize>(value: &S) -> Result<String, CliError> {
    let v = serde_json::to_value(value)?;
    let text = serde_json::to_string(&v)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Hash of everything that determines a run's results.
pub fn config_hash(cfg: &LoadedConfig) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Hashed<'a> {
        scenario: &'a ScenarioConfig,
        optimize: &'a Option<OptimizeSection>,
        sweep: &'a Option<SweepSection>,
    }
    canonical_hash(&Hashed {
        scenario: &cfg.scenario,
        optimize: &cfg.optimize,
        sweep: &cfg.sweep,
    })
}
