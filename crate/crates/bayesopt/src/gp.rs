//! Zero-mean Gaussian-process regression.
//!
//! Inputs are mapped to the unit box of the supplied [`Bounds`] and outputs
//! are centered before fitting; predictions undo both. The kernel is
//! [`Matern52`]; its signal variance is set to the closed-form maximizer of
//! the marginal likelihood and the lengthscales (optionally also a noise
//! ratio) are chosen by a coordinate-wise grid search on the same criterion.

use serde::{Deserialize, Serialize};

use crate::linalg::{backward_solve, cholesky, forward_solve};
use crate::{BoError, Bounds, Matern52, Real};

/// How kernel hyperparameters are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HyperSearch<T> {
    /// Use the given kernel as is (lengthscales in unit-box coordinates).
    Fixed(Matern52<T>),
    /// Grid search on the log marginal likelihood.
    Grid {
        /// Candidate lengthscales, shared by every dimension.
        lengthscales: Vec<T>,
        /// Candidate noise-to-signal variance ratios. The jitter is a floor.
        noise_ratios: Vec<T>,
        /// Coordinate sweeps after the isotropic start.
        sweeps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig<T> {
    /// Diagonal regularization relative to the signal variance.
    pub jitter: T,
    pub search: HyperSearch<T>,
}

impl<T: Real> Default for KernelConfig<T> {
    fn default() -> Self {
        Self {
            jitter: T::lit(1e-6),
            search: HyperSearch::Grid {
                lengthscales: [0.05, 0.1, 0.15, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0, 1.5, 2.5]
                    .iter()
                    .map(|&v| T::lit(v))
                    .collect(),
                noise_ratios: vec![T::lit(1e-6)],
                sweeps: 2,
            },
        }
    }
}

impl<T: Real> KernelConfig<T> {
    /// Grid search that also estimates an observation-noise ratio, for
    /// objectives evaluated with simulation noise.
    pub fn noisy() -> Self {
        let mut cfg = Self::default();
        if let HyperSearch::Grid { noise_ratios, .. } = &mut cfg.search {
            *noise_ratios = [1e-6, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1]
                .iter()
                .map(|&v| T::lit(v))
                .collect();
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct GpModel<T> {
    bounds: Bounds<T>,
    inputs: Vec<Vec<T>>,
    offset: T,
    centered: Vec<T>,
    kernel: Matern52<T>,
    noise_ratio: T,
    chol: Vec<T>,
    alpha: Vec<T>,
    log_likelihood: T,
}

struct Candidate<T> {
    lengthscales: Vec<T>,
    noise_ratio: T,
    signal_variance: T,
    log_likelihood: T,
}

impl<T: Real> GpModel<T> {
    /// Fits the surrogate to `points` (in the coordinates of `bounds`) and
    /// objective `values`.
    pub fn fit(
        points: &[Vec<T>],
        values: &[T],
        bounds: &Bounds<T>,
        config: &KernelConfig<T>,
    ) -> Result<Self, BoError> {
        if points.is_empty() {
            return Err(BoError::EmptyData);
        }
        if points.len() != values.len() {
            return Err(BoError::LengthMismatch {
                inputs: points.len(),
                outputs: values.len(),
            });
        }
        for p in points {
            bounds.check_dim(p)?;
        }
        let m = points.len();
        let inputs: Vec<Vec<T>> = points.iter().map(|p| bounds.to_unit(p)).collect();
        let offset = values.iter().copied().sum::<T>() / T::from_usize_lossy(m);
        let centered: Vec<T> = values.iter().map(|&v| v - offset).collect();
        let scale = values.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(m);
        let variance_floor = T::lit(1e-10) * scale.max(T::one());

        let (kernel, noise_ratio) = match &config.search {
            HyperSearch::Fixed(k) => {
                if k.lengthscales.len() != bounds.dim() {
                    return Err(BoError::DimensionMismatch {
                        expected: bounds.dim(),
                        found: k.lengthscales.len(),
                    });
                }
                (k.clone(), config.jitter)
            }
            HyperSearch::Grid {
                lengthscales,
                noise_ratios,
                sweeps,
            } => {
                if lengthscales.is_empty() || noise_ratios.is_empty() {
                    return Err(BoError::InvalidOption("empty hyperparameter grid".into()));
                }
                let best = grid_search(
                    &inputs,
                    &centered,
                    lengthscales,
                    noise_ratios,
                    *sweeps,
                    config.jitter,
                    variance_floor,
                )?;
                (
                    Matern52::new(best.signal_variance, best.lengthscales),
                    best.noise_ratio,
                )
            }
        };

        let (chol, noise_ratio) = factor_with_escalation(&inputs, &kernel, noise_ratio.max(config.jitter))?;
        let mut alpha = centered.clone();
        forward_solve(&chol, m, &mut alpha);
        let quad: T = alpha.iter().map(|&a| a * a).sum();
        backward_solve(&chol, m, &mut alpha);
        let log_det: T = (0..m).map(|i| chol[i * m + i].ln()).sum::<T>() * T::lit(2.0);
        let two_pi = T::lit(2.0) * T::PI();
        let log_likelihood =
            -T::lit(0.5) * (quad + log_det + T::from_usize_lossy(m) * two_pi.ln());

        Ok(Self {
            bounds: bounds.clone(),
            inputs,
            offset,
            centered,
            kernel,
            noise_ratio,
            chol,
            alpha,
            log_likelihood,
        })
    }

    /// Posterior mean and variance of the latent objective at `x`.
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let u = self.bounds.to_unit(x);
        self.predict_unit(&u)
    }

    /// Same as [`predict`](Self::predict) with `u` already in unit-box coordinates.
    pub fn predict_unit(&self, u: &[T]) -> (T, T) {
        let m = self.inputs.len();
        let mut k: Vec<T> = self.inputs.iter().map(|xi| self.kernel.eval(u, xi)).collect();
        let mean = self.offset + k.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        forward_solve(&self.chol, m, &mut k);
        let explained: T = k.iter().map(|&v| v * v).sum();
        let var = (self.kernel.signal_variance - explained).max(T::zero());
        (mean, var)
    }

    pub fn kernel(&self) -> &Matern52<T> {
        &self.kernel
    }

    pub fn bounds(&self) -> &Bounds<T> {
        &self.bounds
    }

    /// Training inputs in unit-box coordinates.
    pub fn unit_inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    /// Training outputs after centering.
    pub fn centered_outputs(&self) -> &[T] {
        &self.centered
    }

    pub fn output_offset(&self) -> T {
        self.offset
    }

    /// Absolute variance added to the covariance diagonal.
    pub fn noise_variance(&self) -> T {
        self.noise_ratio * self.kernel.signal_variance
    }

    pub fn log_marginal_likelihood(&self) -> T {
        self.log_likelihood
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

fn covariance<T: Real>(inputs: &[Vec<T>], kernel: &Matern52<T>, noise_ratio: T) -> Vec<T> {
    let m = inputs.len();
    let mut k = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.eval(&inputs[i], &inputs[j]);
            k[i * m + j] = v;
            k[j * m + i] = v;
        }
        k[i * m + i] = k[i * m + i] + noise_ratio * kernel.signal_variance;
    }
    k
}

/// Cholesky of the covariance, raising the noise ratio tenfold per failure
/// from 1e-8 up to 1e-4.
fn factor_with_escalation<T: Real>(
    inputs: &[Vec<T>],
    kernel: &Matern52<T>,
    noise_ratio: T,
) -> Result<(Vec<T>, T), BoError> {
    let m = inputs.len();
    let mut ratio = noise_ratio;
    loop {
        if let Some(l) = cholesky(&covariance(inputs, kernel, ratio), m) {
            return Ok((l, ratio));
        }
        let next = (ratio * T::lit(10.0)).max(T::lit(1e-8));
        if next > T::lit(1e-4) * (T::one() + T::lit(1e-9)) {
            return Err(BoError::Factorization {
                jitter: ratio.to_f64().unwrap_or(f64::NAN),
            });
        }
        ratio = next;
    }
}

fn profile_likelihood<T: Real>(
    inputs: &[Vec<T>],
    y: &[T],
    lengthscales: &[T],
    noise_ratio: T,
    variance_floor: T,
) -> Option<Candidate<T>> {
    let m = inputs.len();
    let unit = Matern52::new(T::one(), lengthscales.to_vec());
    let l = cholesky(&covariance(inputs, &unit, noise_ratio), m)?;
    let mut z = y.to_vec();
    forward_solve(&l, m, &mut z);
    let quad: T = z.iter().map(|&v| v * v).sum();
    let m_t = T::from_usize_lossy(m);
    let signal_variance = (quad / m_t).max(variance_floor);
    let log_det: T = (0..m).map(|i| l[i * m + i].ln()).sum::<T>() * T::lit(2.0);
    let two_pi = T::lit(2.0) * T::PI();
    let log_likelihood = -T::lit(0.5)
        * (quad / signal_variance + m_t * signal_variance.ln() + log_det + m_t * two_pi.ln());
    Some(Candidate {
        lengthscales: lengthscales.to_vec(),
        noise_ratio,
        signal_variance,
        log_likelihood,
    })
}

fn grid_search<T: Real>(
    inputs: &[Vec<T>],
    y: &[T],
    grid: &[T],
    noise_ratios: &[T],
    sweeps: usize,
    jitter: T,
    variance_floor: T,
) -> Result<Candidate<T>, BoError> {
    let dim = inputs[0].len();
    let better = |a: &Option<Candidate<T>>, b: &Candidate<T>| match a {
        None => true,
        Some(a) => b.log_likelihood > a.log_likelihood,
    };
    let mut best: Option<Candidate<T>> = None;
    for &g in noise_ratios {
        let g = g.max(jitter);
        for &l in grid {
            if let Some(c) = profile_likelihood(inputs, y, &vec![l; dim], g, variance_floor) {
                if better(&best, &c) {
                    best = Some(c);
                }
            }
        }
    }
    let Some(mut best) = best else {
        return Err(BoError::Factorization {
            jitter: jitter.to_f64().unwrap_or(f64::NAN),
        });
    };
    for _ in 0..sweeps {
        for d in 0..dim {
            for &l in grid {
                let mut ls = best.lengthscales.clone();
                ls[d] = l;
                if let Some(c) = profile_likelihood(inputs, y, &ls, best.noise_ratio, variance_floor) {
                    if c.log_likelihood > best.log_likelihood {
                        best = c;
                    }
                }
            }
        }
        for &g in noise_ratios {
            let g = g.max(jitter);
            if let Some(c) = profile_likelihood(inputs, y, &best.lengthscales, g, variance_floor) {
                if c.log_likelihood > best.log_likelihood {
                    best = c;
                }
            }
        }
    }
    Ok(best)
}
