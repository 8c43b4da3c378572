//! The design → fit → suggest → evaluate loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{lhs_sample, suggest_next, BoError, Bounds, GpModel, KernelConfig, Real, SuggestOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Latin hypercube initial design.
    Design,
    /// Point chosen by maximizing UCB.
    Acquisition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub phase: Phase,
    pub params: Vec<T>,
    /// Objective value; the failure penalty when `error` is set.
    pub value: T,
    pub acquisition: Option<T>,
    /// Best successful value so far.
    pub best: T,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions<T> {
    pub n_init: usize,
    pub n_iter: usize,
    pub beta: T,
    pub seed: u64,
    pub kernel: KernelConfig<T>,
    pub suggest: SuggestOptions,
    /// Value recorded for failed evaluations. `None` uses the worst
    /// successful value minus the observed spread (at least 1).
    pub failure_penalty: Option<T>,
}

impl<T: Real> Default for OptimizeOptions<T> {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_iter: 30,
            beta: T::lit(2.0),
            seed: 0,
            kernel: KernelConfig::default(),
            suggest: SuggestOptions::default(),
            failure_penalty: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T> {
    pub best_params: Vec<T>,
    pub best_value: T,
    pub trace: Vec<TraceEntry<T>>,
}

struct History<T> {
    points: Vec<Vec<T>>,
    outcomes: Vec<Result<T, String>>,
}

impl<T: Real> History<T> {
    fn successes(&self) -> impl Iterator<Item = T> + '_ {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok().copied())
    }

    fn penalty(&self, fixed: Option<T>) -> Option<T> {
        if let Some(p) = fixed {
            return Some(p);
        }
        let lo = self.successes().fold(None, |a: Option<T>, v| Some(a.map_or(v, |a| a.min(v))))?;
        let hi = self.successes().fold(lo, |a, v| a.max(v));
        Some(lo - (hi - lo).max(T::one()))
    }

    fn best(&self) -> Option<(usize, T)> {
        self.outcomes
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.as_ref().ok().map(|&v| (i, v)))
            .fold(None, |acc, (i, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((i, v)),
            })
    }

    fn training_values(&self, penalty: T) -> Vec<T> {
        self.outcomes
            .iter()
            .map(|o| o.as_ref().copied().unwrap_or(penalty))
            .collect()
    }
}

/// Maximizes `objective` over `bounds`.
///
/// The initial Latin hypercube design is evaluated in parallel; every later
/// evaluation is sequential. `observer` sees each trace entry as soon as it
/// is final, which lets callers persist progress incrementally. Objective
/// errors never abort the loop: they are recorded with a penalty value.
pub fn optimize<T, F, O>(
    objective: F,
    bounds: &Bounds<T>,
    options: &OptimizeOptions<T>,
    mut observer: O,
) -> Result<OptimizationResult<T>, BoError>
where
    T: Real,
    F: Fn(&[T]) -> Result<T, String> + Sync,
    O: FnMut(&TraceEntry<T>),
{
    if options.n_init == 0 {
        return Err(BoError::InvalidOption("n_init must be at least 1".into()));
    }
    if options.beta < T::zero() {
        return Err(BoError::InvalidOption("beta must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let design = lhs_sample(bounds, options.n_init, &mut rng);
    let outcomes: Vec<Result<T, String>> = design.par_iter().map(|p| objective(p)).collect();

    let mut history = History {
        points: design,
        outcomes,
    };
    let Some(penalty) = history.penalty(options.failure_penalty) else {
        let last = history
            .outcomes
            .iter()
            .rev()
            .find_map(|o| o.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(BoError::AllEvaluationsFailed(last));
    };

    let mut trace = Vec::with_capacity(options.n_init + options.n_iter);
    let mut best = T::neg_infinity();
    for (i, (p, o)) in history.points.iter().zip(&history.outcomes).enumerate() {
        let (value, error) = match o {
            Ok(v) => {
                best = best.max(*v);
                (*v, None)
            }
            Err(e) => (penalty, Some(e.clone())),
        };
        let entry = TraceEntry {
            iteration: i,
            phase: Phase::Design,
            params: p.clone(),
            value,
            acquisition: None,
            best,
            error,
        };
        observer(&entry);
        trace.push(entry);
    }

    for it in 0..options.n_iter {
        let penalty = history
            .penalty(options.failure_penalty)
            .expect("at least one success");
        let model = GpModel::fit(
            &history.points,
            &history.training_values(penalty),
            bounds,
            &options.kernel,
        )?;
        let (x, acq) = suggest_next(&model, options.beta, options.suggest, &mut rng);
        let outcome = objective(&x);
        let (value, error) = match &outcome {
            Ok(v) => {
                best = best.max(*v);
                (*v, None)
            }
            Err(e) => (penalty, Some(e.clone())),
        };
        let entry = TraceEntry {
            iteration: options.n_init + it,
            phase: Phase::Acquisition,
            params: x.clone(),
            value,
            acquisition: Some(acq),
            best,
            error,
        };
        observer(&entry);
        trace.push(entry);
        history.points.push(x);
        history.outcomes.push(outcome);
    }

    let (idx, best_value) = history.best().expect("at least one success");
    Ok(OptimizationResult {
        best_params: history.points[idx].clone(),
        best_value,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x0: [f64; 2]) -> impl Fn(&[f64]) -> Result<f64, String> + Sync {
        move |x: &[f64]| Ok(-((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)))
    }

    #[test]
    fn zero_iterations_returns_design_best() {
        let b = Bounds::unit(2).unwrap();
        let opts = OptimizeOptions {
            n_init: 8,
            n_iter: 0,
            ..Default::default()
        };
        let r = optimize(bowl([0.3, 0.6]), &b, &opts, |_| {}).unwrap();
        assert_eq!(r.trace.len(), 8);
        let best = r.trace.iter().map(|e| e.value).fold(f64::MIN, f64::max);
        assert_eq!(r.best_value, best);
        assert!(r.trace.iter().all(|e| e.phase == Phase::Design));
    }

    #[test]
    fn failures_are_penalized_not_fatal() {
        let b = Bounds::unit(1).unwrap();
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                Err("gridlock".to_string())
            } else {
                Ok(x[0])
            }
        };
        let opts = OptimizeOptions {
            n_init: 6,
            n_iter: 5,
            ..Default::default()
        };
        let r = optimize(f, &b, &opts, |_| {}).unwrap();
        assert_eq!(r.trace.len(), 11);
        let failed: Vec<_> = r.trace.iter().filter(|e| e.error.is_some()).collect();
        assert!(!failed.is_empty());
        let worst_ok = r
            .trace
            .iter()
            .filter(|e| e.error.is_none())
            .map(|e| e.value)
            .fold(f64::MAX, f64::min);
        assert!(failed.iter().all(|e| e.value < worst_ok));
        assert!(r.best_value <= 0.5);
    }

    #[test]
    fn all_failures_is_an_error() {
        let b = Bounds::unit(1).unwrap();
        let opts = OptimizeOptions::<f64> {
            n_init: 3,
            n_iter: 2,
            ..Default::default()
        };
        let err = optimize(|_: &[f64]| Err("boom".to_string()), &b, &opts, |_| {}).unwrap_err();
        assert_eq!(err, BoError::AllEvaluationsFailed("boom".into()));
    }

    #[test]
    fn observer_sees_every_entry_in_order() {
        let b = Bounds::unit(2).unwrap();
        let opts = OptimizeOptions {
            n_init: 4,
            n_iter: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let r = optimize(bowl([0.5, 0.5]), &b, &opts, |e| seen.push(e.iteration)).unwrap();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        assert!(r.trace.windows(2).all(|w| w[1].best >= w[0].best));
    }
}
