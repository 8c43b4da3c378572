//! Upper-confidence-bound acquisition and its maximization.

use rand::Rng;

use crate::{GpModel, Real};

/// `μ(x) + β σ(x)` of the fitted posterior.
pub fn ucb<T: Real>(model: &GpModel<T>, x: &[T], beta: T) -> T {
    let (mean, var) = model.predict(x);
    mean + beta * var.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuggestOptions {
    /// Quasi-random probes scattered over the box.
    pub probes: usize,
    /// Best probes refined by coordinate search.
    pub refine: usize,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self {
            probes: 2048,
            refine: 8,
        }
    }
}

const PRIMES: [u32; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Randomly shifted Halton points in the unit box.
fn halton_probes<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "at most {} dimensions supported", PRIMES.len());
    let shift: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

/// Approximate maximizer of UCB over the model's bounds: score quasi-random
/// probes, then refine the best few by compass search in the unit box.
/// Returns the point (in the model's coordinates) and its acquisition value.
pub fn suggest_next<T: Real, R: Rng + ?Sized>(
    model: &GpModel<T>,
    beta: T,
    options: SuggestOptions,
    rng: &mut R,
) -> (Vec<T>, T) {
    let dim = model.bounds().dim();
    let score = |u: &[T]| {
        let (m, v) = model.predict_unit(u);
        m + beta * v.sqrt()
    };
    let mut scored: Vec<(Vec<T>, T)> = halton_probes(options.probes.max(1), dim, rng)
        .into_iter()
        .map(|p| {
            let u: Vec<T> = p.into_iter().map(T::lit).collect();
            let s = score(&u);
            (u, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(options.refine.max(1));

    let mut best = scored[0].clone();
    for (start, start_score) in scored {
        let (u, s) = compass_search(start, start_score, &score);
        if s > best.1 {
            best = (u, s);
        }
    }
    (model.bounds().from_unit(&best.0), best.1)
}

fn compass_search<T: Real>(mut u: Vec<T>, mut s: T, score: &impl Fn(&[T]) -> T) -> (Vec<T>, T) {
    let mut step = T::lit(0.05);
    let min_step = T::lit(1e-4);
    while step > min_step {
        let mut improved = false;
        for d in 0..u.len() {
            for dir in [T::one(), -T::one()] {
                let mut cand = u.clone();
                cand[d] = (cand[d] + dir * step).max(T::zero()).min(T::one());
                if cand[d] == u[d] {
                    continue;
                }
                let cs = score(&cand);
                if cs > s {
                    u = cand;
                    s = cs;
                    improved = true;
                }
            }
        }
        if !improved {
            step = step * T::lit(0.5);
        }
    }
    (u, s)
}
