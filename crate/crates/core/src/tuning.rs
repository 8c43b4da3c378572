//! Toll-profile optimization: maps a parameter vector to a toll profile, runs
//! the scenario to equilibrium and scores it by mean social welfare.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tcs_bayesopt::{optimize, BoError, Bounds, OptimizationResult, OptimizeOptions, TraceEntry};

use crate::day2day::{run_to_convergence, Engine, EngineError, ResumeMode, RunOutcome, ScenarioConfig, Snapshot};
use crate::market::{min_endowment, Denomination, TollBasis, TollProfile, TollShape};
use crate::population::Traveler;
use crate::Scalar;

/// Parametric toll families that can be tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ProfileFamily<T> {
    /// Parameters: amplitude, center, spread.
    Gaussian,
    /// Parameters: height, base, center.
    Triangular,
    /// Parameters: five levels then center; band width is fixed.
    Step { width: T },
}

impl<T: Scalar> ProfileFamily<T> {
    pub fn dim(&self) -> usize {
        self.param_names().len()
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ProfileFamily::Gaussian => &["amplitude", "center", "spread"],
            ProfileFamily::Triangular => &["height", "base", "center"],
            ProfileFamily::Step { .. } => &["level0", "level1", "level2", "level3", "level4", "center"],
        }
    }

    /// Panics if `x` has the wrong length.
    pub fn shape(&self, x: &[T]) -> TollShape<T> {
        assert_eq!(x.len(), self.dim(), "parameter count for {self:?}");
        match *self {
            ProfileFamily::Gaussian => TollShape::Gaussian { amplitude: x[0], center: x[1], spread: x[2] },
            ProfileFamily::Triangular => TollShape::Triangular { height: x[0], base: x[1], center: x[2] },
            ProfileFamily::Step { width } => TollShape::Step {
                levels: [x[0], x[1], x[2], x[3], x[4]],
                center: x[5],
                width,
            },
        }
    }

    /// Inverse of [`shape`](Self::shape) for shapes of this family.
    pub fn params(&self, shape: &TollShape<T>) -> Option<Vec<T>> {
        match (self, shape) {
            (ProfileFamily::Gaussian, TollShape::Gaussian { amplitude, center, spread }) => {
                Some(vec![*amplitude, *center, *spread])
            }
            (ProfileFamily::Triangular, TollShape::Triangular { height, base, center }) => {
                Some(vec![*height, *base, *center])
            }
            (ProfileFamily::Step { .. }, TollShape::Step { levels, center, .. }) => {
                let mut v = levels.to_vec();
                v.push(*center);
                Some(v)
            }
            _ => None,
        }
    }

    /// Search box used when none is configured. Money tolls get a wider
    /// amplitude range.
    pub fn default_bounds(&self, denomination: Denomination) -> Vec<(T, T)> {
        let top = match denomination {
            Denomination::Credits => 15.0,
            Denomination::Money => 30.0,
        };
        let b = |lo: f64, hi: f64| (T::lit(lo), T::lit(hi));
        match self {
            ProfileFamily::Gaussian => vec![b(5.0, top), b(30.0, 90.0), b(10.0, 50.0)],
            ProfileFamily::Triangular => vec![b(5.0, top), b(20.0, 200.0), b(30.0, 90.0)],
            ProfileFamily::Step { .. } => {
                let mut v = vec![b(0.0, top); 5];
                v.push(b(30.0, 90.0));
                v
            }
        }
    }
}

/// One toll-design problem on a fixed population.
#[derive(Debug, Clone)]
pub struct TuningProblem<T: Scalar> {
    /// Scenario whose toll gets replaced by each candidate.
    pub base: ScenarioConfig<T>,
    pub travelers: Arc<Vec<Traveler<T>>>,
    pub family: ProfileFamily<T>,
    pub basis: TollBasis,
    pub denomination: Denomination,
    pub bounds: Bounds<T>,
    /// Starting state for every candidate run, typically the no-toll equilibrium.
    pub start: Option<Snapshot<T>>,
    /// Score runs that hit `max_days` without converging as failures.
    pub penalize_nonconvergence: bool,
    /// Reject credit tolls whose minimum endowment is not below the
    /// configured endowment without simulating them; no equilibrium exists.
    pub skip_infeasible: bool,
}

impl<T: Scalar> TuningProblem<T> {
    pub fn profile(&self, x: &[T]) -> TollProfile<T> {
        let shape = self.family.shape(x);
        match self.denomination {
            Denomination::Credits => TollProfile::credits(shape, self.basis),
            Denomination::Money => TollProfile::money(shape, self.basis),
        }
    }

    pub fn config_for(&self, x: &[T]) -> ScenarioConfig<T> {
        let mut cfg = self.base.clone();
        cfg.toll = Some(self.profile(x));
        cfg
    }

    pub fn evaluate(&self, x: &[T]) -> Result<RunOutcome, EngineError> {
        let mut engine = Engine::with_population(self.config_for(x), self.travelers.clone())?;
        if let Some(s) = &self.start {
            engine.apply_snapshot(s, ResumeMode::WarmStart)?;
        }
        run_to_convergence(&mut engine, |_, _| {})
    }

    /// Minimum per-capita endowment the candidate needs, for credit tolls.
    pub fn min_endowment(&self, x: &[T]) -> Option<T> {
        let profile = self.profile(x);
        if !profile.scheme().uses_credits() {
            return None;
        }
        let speed = self.base.speed().ok()?;
        Some(min_endowment(&self.travelers, &profile, speed.free_flow))
    }

    /// Mean social welfare over the summary window, or a failure message.
    pub fn objective(&self, x: &[T]) -> Result<T, String> {
        if self.skip_infeasible {
            if let Some(i_min) = self.min_endowment(x) {
                let endowment = self.base.market.endowment;
                if i_min >= endowment {
                    return Err(format!(
                        "infeasible: minimum endowment {:.3} >= endowment {:.3}",
                        i_min.to_f64().unwrap_or(f64::NAN),
                        endowment.to_f64().unwrap_or(f64::NAN)
                    ));
                }
            }
        }
        let out = self.evaluate(x).map_err(|e| e.to_string())?;
        if self.penalize_nonconvergence && !out.converged {
            return Err(format!("no convergence within {} days", self.base.run.max_days));
        }
        let w = out.summary.mean("social_welfare");
        if !w.is_finite() {
            return Err("no welfare recorded".into());
        }
        Ok(T::lit(w))
    }

    pub fn optimize(
        &self,
        options: &OptimizeOptions<T>,
        observer: impl FnMut(&TraceEntry<T>),
    ) -> Result<OptimizationResult<T>, BoError> {
        optimize(|x| self.objective(x), &self.bounds, options, observer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_round_trip() {
        let fams = [ProfileFamily::Gaussian, ProfileFamily::Triangular, ProfileFamily::Step { width: 10.0 }];
        for f in fams {
            let x: Vec<f64> = (0..f.dim()).map(|i| 1.0 + i as f64).collect();
            assert_eq!(f.params(&f.shape(&x)).unwrap(), x);
            assert_eq!(f.default_bounds(Denomination::Credits).len(), f.dim());
        }
        assert!(ProfileFamily::<f64>::Gaussian.params(&TollShape::Flat { level: 1.0 }).is_none());
    }

    #[test]
    fn money_bounds_are_wider() {
        let c = ProfileFamily::<f64>::Gaussian.default_bounds(Denomination::Credits);
        let m = ProfileFamily::<f64>::Gaussian.default_bounds(Denomination::Money);
        assert_eq!(c[0], (5.0, 15.0));
        assert_eq!(m[0], (5.0, 30.0));
    }

    #[test]
    fn objective_is_welfare_of_candidate() {
        let mut base = ScenarioConfig::<f64>::reference(40);
        base.run.max_days = 12;
        let travelers = Arc::new(crate::population::generate_population(&base.population, 586.8).unwrap());
        let problem = TuningProblem {
            base,
            travelers,
            family: ProfileFamily::Gaussian,
            basis: TollBasis::Distance,
            denomination: Denomination::Money,
            bounds: Bounds::from_pairs(&ProfileFamily::<f64>::Gaussian.default_bounds(Denomination::Money)).unwrap(),
            start: None,
            penalize_nonconvergence: false,
            skip_infeasible: true,
        };
        let x = [10.0, 80.0, 20.0];
        let out = problem.evaluate(&x).unwrap();
        let w = problem.objective(&x).unwrap();
        assert_eq!(w, out.summary.mean("social_welfare"));
        assert_eq!(out.scheme, crate::market::Scheme::CongestionPricing);
        assert!(problem.min_endowment(&x).is_none());
    }

    #[test]
    fn infeasible_credit_tolls_are_rejected_without_simulating() {
        let mut base = ScenarioConfig::<f64>::reference(30);
        base.market.endowment = 0.5;
        let travelers = Arc::new(crate::population::generate_population(&base.population, 586.8).unwrap());
        let mut problem = TuningProblem {
            base,
            travelers,
            family: ProfileFamily::Gaussian,
            basis: TollBasis::Distance,
            denomination: Denomination::Credits,
            bounds: Bounds::from_pairs(&ProfileFamily::<f64>::Gaussian.default_bounds(Denomination::Credits)).unwrap(),
            start: None,
            penalize_nonconvergence: false,
            skip_infeasible: true,
        };
        let x = [15.0, 80.0, 50.0];
        assert!(problem.min_endowment(&x).unwrap() > 0.5);
        assert!(problem.objective(&x).unwrap_err().starts_with("infeasible"));
        problem.skip_infeasible = false;
        problem.base.run.max_days = 3;
        assert!(problem.objective(&x).is_ok());
    }
}
