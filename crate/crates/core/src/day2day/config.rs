use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::market::{Scheme, TollBasis, TollProfile, TollShape};
use crate::mfd::SpeedFunction;
use crate::population::PopulationSpec;
use crate::scalar::Scalar;

use super::EngineError;

/// Default logit scale (1/DKK).
pub const DEFAULT_CHOICE_SCALE: f64 = 0.65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig<T> {
    /// Meters per second.
    pub free_flow_speed: T,
    pub jam_accumulation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorConfig<T> {
    /// Weight on yesterday's perception.
    pub learning_rate: T,
    /// Logit scale in 1/DKK.
    pub choice_scale: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig<T> {
    pub initial_price: T,
    /// Credits per traveler per day.
    pub endowment: T,
    /// DKK per excess credit.
    pub adjustment_rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<T> {
    pub max_days: u32,
    /// Percent.
    pub gap_threshold: T,
    #[serde(default = "default_stable_days")]
    pub stable_days: u32,
    #[serde(default = "default_summary_days")]
    pub summary_days: u32,
    /// Perceptions to start from instead of the day-0 plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<PathBuf>,
}

fn default_stable_days() -> u32 {
    5
}

fn default_summary_days() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig<T> {
    #[serde(default = "default_name")]
    pub name: String,
    /// Seed of the daily choice draws.
    pub seed: u64,
    pub population: PopulationSpec<T>,
    pub network: NetworkConfig<T>,
    pub behavior: BehaviorConfig<T>,
    pub market: MarketConfig<T>,
    /// No table means no toll.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toll: Option<TollProfile<T>>,
    pub run: RunConfig<T>,
}

fn default_name() -> String {
    "scenario".to_string()
}

impl<T: Scalar> ScenarioConfig<T> {
    /// Reference no-toll scenario with `n` travelers.
    pub fn reference(n: usize) -> Self {
        ScenarioConfig {
            name: default_name(),
            seed: 1,
            population: PopulationSpec::reference(n),
            network: NetworkConfig { free_flow_speed: T::lit(9.78), jam_accumulation: 4500 },
            behavior: BehaviorConfig {
                learning_rate: T::lit(0.7),
                choice_scale: T::lit(DEFAULT_CHOICE_SCALE),
            },
            market: MarketConfig {
                initial_price: T::zero(),
                endowment: T::lit(5.0),
                adjustment_rate: T::lit(2e-4),
            },
            toll: None,
            run: RunConfig {
                max_days: 100,
                gap_threshold: T::lit(0.5),
                stable_days: default_stable_days(),
                summary_days: default_summary_days(),
                warm_start: None,
            },
        }
    }

    /// Reference scenario with the gaussian(11, 18, 80) distance-based credit toll.
    pub fn reference_tcs(n: usize) -> Self {
        let mut cfg = Self::reference(n);
        cfg.toll = Some(TollProfile::credits(
            TollShape::Gaussian { amplitude: T::lit(11.0), center: T::lit(80.0), spread: T::lit(18.0) },
            TollBasis::Distance,
        ));
        cfg
    }

    pub fn scheme(&self) -> Scheme {
        self.toll.as_ref().map_or(Scheme::None, |p| p.scheme())
    }

    pub fn speed(&self) -> Result<SpeedFunction<T>, EngineError> {
        Ok(SpeedFunction::from_mps(self.network.free_flow_speed, self.network.jam_accumulation)?)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |field: &str, msg: String| Err(EngineError::Config { field: field.to_string(), message: msg });
        self.population.validate()?;
        self.speed()?;
        let b = &self.behavior;
        if !(b.learning_rate > T::zero() && b.learning_rate < T::one()) {
            return bad("behavior.learning_rate", format!("{} not in (0, 1)", b.learning_rate));
        }
        if !(b.choice_scale.is_finite() && b.choice_scale > T::zero()) {
            return bad("behavior.choice_scale", format!("{} must be positive", b.choice_scale));
        }
        let m = &self.market;
        if !(m.initial_price.is_finite() && m.initial_price >= T::zero()) {
            return bad("market.initial_price", format!("{} must be nonnegative", m.initial_price));
        }
        if !(m.endowment.is_finite() && m.endowment >= T::zero()) {
            return bad("market.endowment", format!("{} must be nonnegative", m.endowment));
        }
        if !(m.adjustment_rate.is_finite() && m.adjustment_rate > T::zero()) {
            return bad("market.adjustment_rate", format!("{} must be positive", m.adjustment_rate));
        }
        if let Some(toll) = &self.toll {
            if let Err(e) = toll.validate() {
                return bad("toll", e.to_string());
            }
        }
        let r = &self.run;
        if r.max_days < 1 {
            return bad("run.max_days", "must be at least 1".into());
        }
        if !(r.gap_threshold.is_finite() && r.gap_threshold > T::zero()) {
            return bad("run.gap_threshold", format!("{} must be positive", r.gap_threshold));
        }
        if r.stable_days < 1 || r.summary_days < 1 {
            return bad("run", "stable_days and summary_days must be at least 1".into());
        }
        Ok(())
    }
}
