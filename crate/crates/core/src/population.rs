//! Traveler population drawn from truncated Gaussians.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

const RETRY_CAP: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum PopulationError {
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
    #[error("rejection sampling for {what} of traveler {traveler} exceeded {RETRY_CAP} draws")]
    RetryCapExceeded { what: &'static str, traveler: usize },
    #[error("population file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traveler<T> {
    pub id: usize,
    /// Meters.
    pub trip_length: T,
    /// Minutes.
    pub desired_arrival: T,
    pub sde: T,
    pub sdl: T,
    /// DKK per minute.
    pub value_of_time: T,
    pub initial_departure: T,
    /// Candidate departure minutes, ascending, centered on `initial_departure`.
    pub window: Vec<T>,
}

impl<T: Scalar> Traveler<T> {
    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

/// Departure window `t0 - tau*dt, ..., t0 + tau*dt`.
pub fn departure_window<T: Scalar>(t0: T, tau: usize, dt: T) -> Vec<T> {
    (0..=2 * tau)
        .map(|k| t0 + dt * (T::from_usize_lossy(k) - T::from_usize_lossy(tau)))
        .collect()
}

/// Normal distribution restricted to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal<T> {
    pub mean: T,
    pub std_dev: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> TruncatedNormal<T> {
    fn validate(&self, name: &str) -> Result<(), PopulationError> {
        if !(self.mean.is_finite() && self.std_dev.is_finite()) {
            return Err(PopulationError::InvalidSpec(format!("{name}: non-finite parameter")));
        }
        if self.std_dev < T::zero() {
            return Err(PopulationError::InvalidSpec(format!("{name}: negative std dev")));
        }
        if self.lower.is_nan() || self.upper.is_nan() || self.lower >= self.upper {
            return Err(PopulationError::InvalidSpec(format!("{name}: lower bound must be below upper bound")));
        }
        Ok(())
    }

    fn contains(&self, x: T) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Bivariate Gaussian for `(sde, sdl)` with per-component truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyDistribution<T> {
    pub mean: [T; 2],
    pub covariance: [[T; 2]; 2],
    pub sde_bounds: [T; 2],
    pub sdl_bounds: [T; 2],
}

impl<T: Scalar> PenaltyDistribution<T> {
    fn validate(&self) -> Result<(), PopulationError> {
        let c = self.covariance;
        let all = [self.mean[0], self.mean[1], c[0][0], c[0][1], c[1][0], c[1][1]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PopulationError::InvalidSpec("penalties: non-finite parameter".into()));
        }
        if c[0][1] != c[1][0] {
            return Err(PopulationError::InvalidSpec("penalties: covariance not symmetric".into()));
        }
        let tol = T::lit(1e-12) * (c[0][0] * c[1][1]).abs().max(T::one());
        if c[0][0] < T::zero() || c[1][1] < T::zero() || c[0][0] * c[1][1] - c[0][1] * c[1][0] < -tol {
            return Err(PopulationError::InvalidSpec(
                "penalties: covariance not positive semidefinite".into(),
            ));
        }
        for (name, b) in [("sde", self.sde_bounds), ("sdl", self.sdl_bounds)] {
            if b[0].is_nan() || b[1].is_nan() || b[0] >= b[1] {
                return Err(PopulationError::InvalidSpec(format!(
                    "penalties: {name} lower bound must be below upper bound"
                )));
            }
        }
        Ok(())
    }

    /// Lower Cholesky factor, tolerant of zero variances.
    fn factor(&self) -> [[f64; 2]; 2] {
        let c = self.covariance.map(|row| row.map(|v| v.to_f64().unwrap_or(0.0)));
        let l11 = c[0][0].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { c[1][0] / l11 } else { 0.0 };
        let l22 = (c[1][1] - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec<T> {
    pub n_travelers: usize,
    /// Meters; samples must additionally be strictly positive.
    pub trip_length: TruncatedNormal<T>,
    /// Minutes.
    pub departure: TruncatedNormal<T>,
    pub penalties: PenaltyDistribution<T>,
    /// DKK per minute.
    pub theta: T,
    /// Window half-width in steps.
    pub tau: usize,
    /// Step in minutes.
    pub dt: T,
    pub seed: u64,
}

impl<T: Scalar> PopulationSpec<T> {
    /// Defaults of the reference scenario with `n_travelers` travelers.
    pub fn reference(n_travelers: usize) -> Self {
        PopulationSpec {
            n_travelers,
            trip_length: TruncatedNormal {
                mean: T::lit(4600.0),
                std_dev: T::lit(920.0),
                lower: T::zero(),
                upper: T::infinity(),
            },
            departure: TruncatedNormal {
                mean: T::lit(80.0),
                std_dev: T::lit(18.0),
                lower: T::lit(20.0),
                upper: T::lit(150.0),
            },
            penalties: PenaltyDistribution {
                mean: [T::lit(0.5), T::lit(4.0)],
                covariance: [[T::lit(0.0025), T::lit(0.01)], [T::lit(0.01), T::lit(0.16)]],
                sde_bounds: [T::lit(0.3), T::lit(0.7)],
                sdl_bounds: [T::lit(2.5), T::lit(5.5)],
            },
            theta: T::lit(1.1),
            tau: 30,
            dt: T::one(),
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        if self.n_travelers == 0 {
            return Err(PopulationError::InvalidSpec("N must be positive".into()));
        }
        self.trip_length.validate("trip_length")?;
        if self.trip_length.upper <= T::zero() {
            return Err(PopulationError::InvalidSpec(
                "trip_length: upper bound must be positive".into(),
            ));
        }
        self.departure.validate("departure")?;
        self.penalties.validate()?;
        if !(self.theta.is_finite() && self.theta > T::zero()) {
            return Err(PopulationError::InvalidSpec("theta must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(PopulationError::InvalidSpec("dt must be positive".into()));
        }
        Ok(())
    }
}

fn draw_truncated<T: Scalar, R: Rng>(
    dist: &TruncatedNormal<T>,
    positive: bool,
    what: &'static str,
    traveler: usize,
    rng: &mut R,
) -> Result<T, PopulationError> {
    let mean = dist.mean.to_f64().unwrap_or(f64::NAN);
    let sd = dist.std_dev.to_f64().unwrap_or(f64::NAN);
    for _ in 0..RETRY_CAP {
        let z: f64 = StandardNormal.sample(rng);
        let x = T::lit(mean + sd * z);
        if dist.contains(x) && (!positive || x > T::zero()) {
            return Ok(x);
        }
    }
    Err(PopulationError::RetryCapExceeded { what, traveler })
}

fn draw_penalties<T: Scalar, R: Rng>(
    dist: &PenaltyDistribution<T>,
    factor: &[[f64; 2]; 2],
    traveler: usize,
    rng: &mut R,
) -> Result<(T, T), PopulationError> {
    let m = dist.mean.map(|v| v.to_f64().unwrap_or(f64::NAN));
    for _ in 0..RETRY_CAP {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        let sde = T::lit(m[0] + factor[0][0] * z0);
        let sdl = T::lit(m[1] + factor[1][0] * z0 + factor[1][1] * z1);
        if sde >= dist.sde_bounds[0]
            && sde <= dist.sde_bounds[1]
            && sdl >= dist.sdl_bounds[0]
            && sdl <= dist.sdl_bounds[1]
        {
            return Ok((sde, sdl));
        }
    }
    Err(PopulationError::RetryCapExceeded { what: "penalties", traveler })
}

/// Draws the population. Each traveler has its own random stream, so the
/// result depends only on the spec.
pub fn generate_population<T: Scalar>(
    spec: &PopulationSpec<T>,
    free_flow_speed: T,
) -> Result<Vec<Traveler<T>>, PopulationError> {
    spec.validate()?;
    if !(free_flow_speed.is_finite() && free_flow_speed > T::zero()) {
        return Err(PopulationError::InvalidSpec("free-flow speed must be positive".into()));
    }
    let factor = spec.penalties.factor();
    (0..spec.n_travelers)
        .map(|id| {
            let mut rng = stream(spec.seed, Purpose::Population, id as u64, 0);
            let trip_length = draw_truncated(&spec.trip_length, true, "trip length", id, &mut rng)?;
            let t0 = draw_truncated(&spec.departure, false, "departure", id, &mut rng)?;
            let (sde, sdl) = draw_penalties(&spec.penalties, &factor, id, &mut rng)?;
            Ok(Traveler {
                id,
                trip_length,
                desired_arrival: t0 + trip_length / free_flow_speed,
                sde,
                sdl,
                value_of_time: spec.theta,
                initial_departure: t0,
                window: departure_window(t0, spec.tau, spec.dt),
            })
        })
        .collect()
}

/// Writes one traveler per line: `id,L,t0,T*,sde,sdl`.
pub fn write_population<T: Scalar, W: Write>(
    travelers: &[Traveler<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "id,trip_length,initial_departure,desired_arrival,sde,sdl")?;
    for t in travelers {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            t.id, t.trip_length, t.initial_departure, t.desired_arrival, t.sde, t.sdl
        )?;
    }
    Ok(())
}

/// Reads a file written by [`write_population`]; windows are rebuilt from
/// `tau` and `dt`.
pub fn read_population<T: Scalar, R: BufRead>(
    input: R,
    theta: T,
    tau: usize,
    dt: T,
) -> Result<Vec<Traveler<T>>, PopulationError> {
    let mut travelers = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if idx == 0 || line.is_empty() {
            continue;
        }
        let parse_err = |message: String| PopulationError::Parse { line: idx + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(format!("expected 6 fields, found {}", fields.len())));
        }
        let id: usize = fields[0].parse().map_err(|e| parse_err(format!("id: {e}")))?;
        let mut num = [T::zero(); 5];
        for (slot, field) in num.iter_mut().zip(&fields[1..]) {
            let v: f64 = field.parse().map_err(|e| parse_err(format!("{field:?}: {e}")))?;
            *slot = T::lit(v);
        }
        let [trip_length, t0, desired_arrival, sde, sdl] = num;
        travelers.push(Traveler {
            id,
            trip_length,
            desired_arrival,
            sde,
            sdl,
            value_of_time: theta,
            initial_departure: t0,
            window: departure_window(t0, tau, dt),
        });
    }
    Ok(travelers)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VF: f64 = 586.8;

    #[test]
    fn degenerate_distributions() {
        let mut spec = PopulationSpec::<f64>::reference(5);
        spec.trip_length.std_dev = 0.0;
        spec.departure.std_dev = 0.0;
        spec.penalties.covariance = [[0.0, 0.0], [0.0, 0.0]];
        let pop = generate_population(&spec, VF).unwrap();
        for t in &pop {
            assert_eq!(t.trip_length, 4600.0);
            assert_eq!(t.initial_departure, 80.0);
            assert_eq!(t.desired_arrival, 80.0 + 4600.0 / VF);
            assert_eq!((t.sde, t.sdl), (0.5, 4.0));
        }
    }

    #[test]
    fn reference_sample_statistics() {
        let spec = PopulationSpec::<f64>::reference(3700);
        let pop = generate_population(&spec, VF).unwrap();
        let n = pop.len() as f64;
        let mean = pop.iter().map(|t| t.trip_length).sum::<f64>() / n;
        assert!((mean - 4600.0).abs() < 3.0 * 920.0 / n.sqrt(), "mean {mean}");
        for t in &pop {
            assert!((0.3..=0.7).contains(&t.sde));
            assert!((2.5..=5.5).contains(&t.sdl));
            assert!((20.0..=150.0).contains(&t.initial_departure));
            assert!(t.trip_length > 0.0);
            assert_eq!(t.window.len(), 61);
            assert_eq!(t.window[30], t.initial_departure);
        }
    }

    #[test]
    fn single_traveler_is_deterministic() {
        let mut spec = PopulationSpec::<f64>::reference(1);
        spec.seed = 99;
        let a = generate_population(&spec, VF).unwrap();
        let b = generate_population(&spec, VF).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn penalties_are_positively_correlated() {
        let pop = generate_population(&PopulationSpec::<f64>::reference(4000), VF).unwrap();
        let n = pop.len() as f64;
        let me = pop.iter().map(|t| t.sde).sum::<f64>() / n;
        let ml = pop.iter().map(|t| t.sdl).sum::<f64>() / n;
        let cov = pop.iter().map(|t| (t.sde - me) * (t.sdl - ml)).sum::<f64>() / n;
        assert!(cov > 0.005, "cov {cov}");
    }

    #[test]
    fn impossible_bounds_hit_retry_cap() {
        let mut spec = PopulationSpec::<f64>::reference(1);
        spec.departure = TruncatedNormal { mean: 0.0, std_dev: 0.0, lower: 20.0, upper: 150.0 };
        assert!(matches!(
            generate_population(&spec, VF),
            Err(PopulationError::RetryCapExceeded { what: "departure", .. })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = PopulationSpec::<f64>::reference(0);
        assert!(spec.validate().is_err());
        spec.n_travelers = 3;
        spec.departure.std_dev = -1.0;
        assert!(spec.validate().is_err());
        spec.departure.std_dev = 1.0;
        spec.departure.lower = 200.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let pop = generate_population(&PopulationSpec::<f64>::reference(20), VF).unwrap();
        let mut buf = Vec::new();
        write_population(&pop, &mut buf).unwrap();
        let back = read_population(buf.as_slice(), 1.1, 30, 1.0).unwrap();
        assert_eq!(pop, back);
    }

    #[test]
    fn works_in_single_precision() {
        let pop = generate_population(&PopulationSpec::<f32>::reference(50), 586.8f32).unwrap();
        assert!(pop.iter().all(|t| (0.3..=0.7).contains(&t.sde)));
    }
}
