//! Latin hypercube designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Bounds, Real};

/// Draws `m` points so that, in every dimension, each of the `m` equal-width
/// strata of the box holds exactly one point (uniformly placed inside it).
/// Strata are matched across dimensions by independent random permutations.
pub fn lhs_sample<T: Real, R: Rng + ?Sized>(bounds: &Bounds<T>, m: usize, rng: &mut R) -> Vec<Vec<T>> {
    let dim = bounds.dim();
    let mut points = vec![vec![T::zero(); dim]; m];
    if m == 0 {
        return points;
    }
    let m_t = T::from_usize_lossy(m);
    let mut strata: Vec<usize> = (0..m).collect();
    for d in 0..dim {
        strata.shuffle(rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            let frac = (T::from_usize_lossy(s) + T::lit(u)) / m_t;
            point[d] = bounds.lower()[d] + frac * bounds.width(d);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stratum(b: &Bounds<f64>, d: usize, v: f64, m: usize) -> usize {
        let k = ((v - b.lower()[d]) / b.width(d) * m as f64).floor() as usize;
        k.min(m - 1)
    }

    #[test]
    fn single_point_lies_in_box() {
        let b = Bounds::from_pairs(&[(5.0, 15.0), (30.0, 90.0)]).unwrap();
        let pts = lhs_sample(&b, 1, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(pts.len(), 1);
        assert!(b.contains(&pts[0]));
    }

    #[test]
    fn thirty_point_design_hits_every_stratum_once() {
        let b = Bounds::from_pairs(&[(5.0, 15.0), (30.0, 90.0), (10.0, 50.0)]).unwrap();
        let pts = lhs_sample(&b, 30, &mut ChaCha8Rng::seed_from_u64(11));
        for d in 0..3 {
            let mut counts = [0usize; 30];
            for p in &pts {
                counts[stratum(&b, d, p[d], 30)] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1), "dim {d}: {counts:?}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let b = Bounds::<f64>::unit(4).unwrap();
        let a = lhs_sample(&b, 12, &mut ChaCha8Rng::seed_from_u64(5));
        let c = lhs_sample(&b, 12, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, c);
    }
}
