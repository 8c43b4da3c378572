use proptest::prelude::*;
use tcs_core::mfd::{fictional_travel_time, simulate_day, SpeedFunction};

/// Straightforward reservoir simulation: keeps every active traveler's
/// remaining distance and jumps from event to event.
fn oracle(dep: &[f64], len: &[f64], vf: f64, n_jam: f64) -> Vec<f64> {
    let n = dep.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dep[a].partial_cmp(&dep[b]).unwrap().then(a.cmp(&b)));
    let mut remaining = len.to_vec();
    let mut arrival = vec![f64::NAN; n];
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut t = f64::NEG_INFINITY;
    loop {
        let m = active.len() as f64;
        let v = if active.is_empty() { vf } else { vf * (1.0 - (m - 1.0) / n_jam).powi(2) };
        let t_dep = if next < n { dep[order[next]] } else { f64::INFINITY };
        let (t_arr, who) = active
            .iter()
            .map(|&i| (t + remaining[i] / v, i))
            .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        if t_dep.is_infinite() && t_arr.is_infinite() {
            break;
        }
        let t_new = t_arr.min(t_dep);
        if t.is_finite() {
            for &i in &active {
                remaining[i] -= v * (t_new - t);
            }
        }
        t = t_new;
        if t_arr <= t_dep {
            arrival[who] = t;
            remaining[who] = 0.0;
            active.retain(|&i| i != who);
        } else {
            active.push(order[next]);
            next += 1;
        }
    }
    (0..n).map(|i| arrival[i] - dep[i]).collect()
}

fn speed(n_jam: usize) -> SpeedFunction<f64> {
    SpeedFunction::new(586.8, n_jam).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn matches_oracle_on_a_dense_instance() {
    let n = 300;
    let dep: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
    let len: Vec<f64> = (0..n).map(|i| 1500.0 + ((i * 7919) % 6000) as f64).collect();
    let traj = simulate_day(&dep, &len, &speed(500)).unwrap();
    let expect = oracle(&dep, &len, 586.8, 500.0);
    for i in 0..n {
        assert!(close(traj.travel_times[i], expect[i], 1e-9), "{i}: {} vs {}", traj.travel_times[i], expect[i]);
    }
    assert!(traj.peak_accumulation > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_oracle(
        trips in prop::collection::vec((0u32..90, 50.0f64..9000.0), 1..60)
    ) {
        let dep: Vec<f64> = trips.iter().map(|t| t.0 as f64).collect();
        let len: Vec<f64> = trips.iter().map(|t| t.1).collect();
        let traj = simulate_day(&dep, &len, &speed(100)).unwrap();
        let expect = oracle(&dep, &len, 586.8, 100.0);
        for i in 0..dep.len() {
            prop_assert!(close(traj.travel_times[i], expect[i], 1e-9), "{} vs {}", traj.travel_times[i], expect[i]);
        }
    }

    #[test]
    fn integrated_distance_equals_trip_length(
        trips in prop::collection::vec((0.0f64..120.0, 10.0f64..9000.0), 1..80)
    ) {
        let dep: Vec<f64> = trips.iter().map(|t| t.0).collect();
        let len: Vec<f64> = trips.iter().map(|t| t.1).collect();
        let traj = simulate_day(&dep, &len, &speed(200)).unwrap();
        for i in 0..dep.len() {
            let covered = traj.cum_distance(traj.arrivals[i]) - traj.cum_distance(dep[i]);
            prop_assert!((covered - len[i]).abs() <= 1e-6 * len[i]);
            prop_assert!(traj.travel_times[i] >= len[i] / 586.8 - 1e-9);
        }
    }

    #[test]
    fn an_extra_traveler_never_speeds_anyone_up(
        trips in prop::collection::vec((0.0f64..60.0, 100.0f64..6000.0), 1..40),
        extra in (0.0f64..60.0, 100.0f64..6000.0),
    ) {
        let dep: Vec<f64> = trips.iter().map(|t| t.0).collect();
        let len: Vec<f64> = trips.iter().map(|t| t.1).collect();
        let base = simulate_day(&dep, &len, &speed(200)).unwrap();
        let mut dep2 = dep.clone();
        let mut len2 = len.clone();
        dep2.push(extra.0);
        len2.push(extra.1);
        let more = simulate_day(&dep2, &len2, &speed(200)).unwrap();
        for i in 0..dep.len() {
            prop_assert!(more.travel_times[i] >= base.travel_times[i] - 1e-9);
        }
    }

    #[test]
    fn fictional_trip_of_a_real_traveler_matches_its_experience(
        trips in prop::collection::vec((0.0f64..60.0, 100.0f64..6000.0), 1..40),
    ) {
        let dep: Vec<f64> = trips.iter().map(|t| t.0).collect();
        let len: Vec<f64> = trips.iter().map(|t| t.1).collect();
        let traj = simulate_day(&dep, &len, &speed(200)).unwrap();
        for i in 0..dep.len() {
            let f = fictional_travel_time(&traj, dep[i], len[i]);
            prop_assert!(close(f, traj.travel_times[i], 1e-8), "{f} vs {}", traj.travel_times[i]);
        }
    }
}
