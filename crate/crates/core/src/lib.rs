//! Day-to-day departure-time dynamics under a tradable credit scheme on a
//! single-reservoir trip-based MFD.

pub mod behavior;
pub mod day2day;
pub mod market;
pub mod mfd;
pub mod population;
pub mod rng;
pub mod tuning;
mod scalar;

pub use scalar::Scalar;

/// Default floating point type.
pub type Real = f64;
pub type Traveler = population::Traveler<Real>;
pub type PopulationSpec = population::PopulationSpec<Real>;
pub type SpeedFunction = mfd::SpeedFunction<Real>;
pub type DayTrajectory = mfd::DayTrajectory<Real>;
pub type TollProfile = market::TollProfile<Real>;
pub type TollShape = market::TollShape<Real>;
pub type CostBreakdown = behavior::CostBreakdown<Real>;
pub type ScenarioConfig = day2day::ScenarioConfig<Real>;
pub type DayRecord = day2day::DayRecord<Real>;
pub type Engine = day2day::Engine<Real>;
pub type Snapshot = day2day::Snapshot<Real>;
