use tcs_bayesopt::{optimize, Bounds, OptimizeOptions, Phase};

fn box3() -> Bounds<f64> {
    Bounds::from_pairs(&[(5.0, 15.0), (30.0, 90.0), (10.0, 50.0)]).unwrap()
}

const OPTIMUM: [f64; 3] = [9.0, 56.0, 26.0];

fn concave(x: &[f64]) -> Result<f64, String> {
    let w = [10.0, 60.0, 40.0];
    Ok(-30.0 - 20.0 * x.iter().zip(OPTIMUM).zip(w).map(|((a, o), w)| ((a - o) / w).powi(2)).sum::<f64>())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn recovers_concave_optimum_for_every_seed() {
    let b = box3();
    let tol = 0.05 * b.diagonal();
    let mut misses = Vec::new();
    for seed in 0..10 {
        let opts = OptimizeOptions { n_init: 10, n_iter: 30, seed, ..OptimizeOptions::default() };
        let res = optimize(concave, &b, &opts, |_| {}).unwrap();
        assert_eq!(res.trace.len(), 40);
        let d = distance(&res.best_params, &OPTIMUM);
        if d > tol {
            misses.push((seed, d));
        }
    }
    assert!(misses.is_empty(), "seeds off by more than {tol:.3}: {misses:?}");
}

#[test]
fn design_precedes_acquisition_and_best_is_monotone() {
    let opts = OptimizeOptions { n_init: 10, n_iter: 5, seed: 3, ..OptimizeOptions::default() };
    let res = optimize(concave, &box3(), &opts, |_| {}).unwrap();
    assert!(res.trace[..10].iter().all(|e| e.phase == Phase::Design && e.acquisition.is_none()));
    assert!(res.trace[10..].iter().all(|e| e.phase == Phase::Acquisition && e.acquisition.is_some()));
    assert!(res.trace.windows(2).all(|w| w[1].best >= w[0].best));
    assert_eq!(res.best_value, res.trace.last().unwrap().best);
}
