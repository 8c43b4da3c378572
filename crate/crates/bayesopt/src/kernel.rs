use serde::{Deserialize, Serialize};

use crate::Real;

/// Matérn covariance with smoothness 5/2 and per-dimension lengthscales:
///
/// `k(r) = s² (1 + √5 r + 5r²/3) exp(-√5 r)`, `r² = Σ_d ((x_d - x'_d) / ℓ_d)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matern52<T> {
    pub signal_variance: T,
    pub lengthscales: Vec<T>,
}

impl<T: Real> Matern52<T> {
    pub fn new(signal_variance: T, lengthscales: Vec<T>) -> Self {
        Self {
            signal_variance,
            lengthscales,
        }
    }

    pub fn isotropic(signal_variance: T, lengthscale: T, dim: usize) -> Self {
        Self::new(signal_variance, vec![lengthscale; dim])
    }

    /// Lengthscale-weighted Euclidean distance.
    pub fn scaled_distance(&self, a: &[T], b: &[T]) -> T {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((&x, &y), &l)| {
                let z = (x - y) / l;
                z * z
            })
            .sum::<T>()
            .sqrt()
    }

    /// Kernel as a function of the scaled distance.
    pub fn of_distance(&self, r: T) -> T {
        let sqrt5_r = T::lit(5.0).sqrt() * r;
        self.signal_variance
            * (T::one() + sqrt5_r + sqrt5_r * sqrt5_r / T::lit(3.0))
            * (-sqrt5_r).exp()
    }

    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        self.of_distance(self.scaled_distance(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_gives_signal_variance() {
        let k = Matern52::new(2.5, vec![0.3, 0.7]);
        assert_eq!(k.eval(&[0.1, 0.9], &[0.1, 0.9]), 2.5);
    }

    #[test]
    fn decays_monotonically_with_distance() {
        let k = Matern52::isotropic(1.0, 0.5, 1);
        let mut prev = k.eval(&[0.0], &[0.0]);
        for i in 1..50 {
            let v = k.eval(&[0.0], &[i as f64 * 0.05]);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn f32_matches_f64() {
        let k64 = Matern52::new(1.3f64, vec![0.4, 0.2]);
        let k32 = Matern52::new(1.3f32, vec![0.4, 0.2]);
        let a = k64.eval(&[0.1, 0.2], &[0.35, 0.05]);
        let b = k32.eval(&[0.1, 0.2], &[0.35, 0.05]);
        assert!((a - b as f64).abs() < 1e-6);
    }
}
