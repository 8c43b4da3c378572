use proptest::prelude::*;
use tcs_core::behavior::{choice_probabilities, generalized_cost, learning_update};
use tcs_core::day2day::welfare;
use tcs_core::market::{
    settle_consumption, update_price, update_price_checked, Scheme, TollBasis, TollProfile, TollShape,
};
use tcs_core::population::{departure_window, Traveler};

fn perceptions(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-60.0f64..0.0, n)
}

fn traveler(length: f64, arrival: f64, sde: f64, sdl: f64) -> Traveler<f64> {
    Traveler {
        id: 0,
        trip_length: length,
        desired_arrival: arrival,
        sde,
        sdl,
        value_of_time: 1.1,
        initial_departure: arrival - 8.0,
        window: departure_window(arrival - 8.0, 30, 1.0),
    }
}

fn jacobian_fd(c: &[f64], mu: f64, h: f64) -> Vec<Vec<f64>> {
    let n = c.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut up = c.to_vec();
        let mut down = c.to_vec();
        up[j] += h;
        down[j] -= h;
        let pu = choice_probabilities(&up, mu);
        let pd = choice_probabilities(&down, mu);
        for i in 0..n {
            jac[i][j] = (pu[i] - pd[i]) / (2.0 * h);
        }
    }
    jac
}

proptest! {
    #[test]
    fn probabilities_form_a_distribution(c in perceptions(1..70), mu in 0.05f64..3.0) {
        let p = choice_probabilities(&c, mu);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0 || mu * (c.iter().cloned().fold(f64::MIN, f64::max) - c[0]) > 700.0));
    }

    #[test]
    fn probabilities_ignore_a_common_shift(c in perceptions(2..30), shift in -100.0f64..100.0, mu in 0.05f64..2.0) {
        let shifted: Vec<f64> = c.iter().map(|x| x + shift).collect();
        let a = choice_probabilities(&c, mu);
        let b = choice_probabilities(&shifted, mu);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn better_perceived_slot_is_more_likely(c in perceptions(2..30), mu in 0.05f64..2.0) {
        let p = choice_probabilities(&c, mu);
        for i in 0..c.len() {
            for j in 0..c.len() {
                if c[i] > c[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn logit_jacobian_has_the_expected_sign_pattern(c in prop::collection::vec(-10.0f64..0.0, 5), mu in 0.1f64..1.5) {
        let jac = jacobian_fd(&c, mu, 1e-5);
        let p = choice_probabilities(&c, mu);
        for i in 0..5 {
            prop_assert!(jac[i][i] > 0.0);
            prop_assert!(jac[i].iter().sum::<f64>().abs() <= 1e-8);
            for j in 0..5 {
                let analytic = mu * (if i == j { p[i] } else { 0.0 } - p[i] * p[j]);
                prop_assert!((jac[i][j] - analytic).abs() <= 1e-7);
                if i != j {
                    prop_assert!(jac[i][j] < 0.0);
                    prop_assert!((jac[i][j] - jac[j][i]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn learning_contracts_towards_experience(
        pairs in prop::collection::vec((-80.0f64..0.0, -80.0f64..0.0), 1..40),
        omega in 0.0f64..1.0,
    ) {
        let (old, new): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let next = learning_update(&old, &new, omega).unwrap();
        for k in 0..old.len() {
            let gap_before = (old[k] - new[k]).abs();
            let gap_after = (next[k] - new[k]).abs();
            prop_assert!((gap_after - omega * gap_before).abs() <= 1e-12 * (1.0 + gap_before));
            prop_assert!(next[k] >= old[k].min(new[k]) - 1e-12 && next[k] <= old[k].max(new[k]) + 1e-12);
        }
    }

    #[test]
    fn price_stays_nonnegative(p in 0.0f64..20.0, z in -1e5f64..1e5, k in 1e-6f64..1e-2) {
        let (next, clamped) = update_price_checked(p, z, k);
        prop_assert!(next >= 0.0);
        if !clamped {
            prop_assert_eq!(next, if p > 0.0 { p + k * z } else { p + (k * z).max(0.0) });
        }
    }

    #[test]
    fn doubling_the_rate_doubles_an_unclamped_step(p in 0.1f64..20.0, z in -1e3f64..1e4, k in 1e-6f64..1e-4) {
        let one = update_price(p, z, k) - p;
        let two = update_price(p, z, 2.0 * k) - p;
        if p + 2.0 * k * z >= 0.0 {
            prop_assert!((two - 2.0 * one).abs() <= 1e-12 * (1.0 + p));
        }
    }

    #[test]
    fn price_is_fixed_exactly_at_complementarity(p in 0.0f64..20.0, z in -1e3f64..1e3, k in 1e-6f64..1e-3) {
        let p = if p < 1.0 { 0.0 } else { p };
        let z = if z.abs() < 10.0 { 0.0 } else { z };
        let fixed = update_price(p, z, k) == p;
        let complementary = p * z == 0.0 && z <= 0.0 || p > 0.0 && z == 0.0;
        prop_assert_eq!(fixed, complementary);
    }

    #[test]
    fn trades_balance_the_excess(
        consumption in prop::collection::vec(0.0f64..20.0, 1..200),
        endowment in 0.0f64..10.0,
        price in 0.0f64..10.0,
    ) {
        let (tx, z) = settle_consumption(&consumption, endowment, price);
        let scale = 1.0 + consumption.iter().sum::<f64>();
        prop_assert!((tx.total_bought - tx.total_sold - z).abs() <= 1e-10 * scale);
        for (a, &c) in tx.accounts.iter().zip(&consumption) {
            prop_assert!((a.from_endowment + a.bought - c).abs() <= 1e-12 * (1.0 + c));
            prop_assert!((a.from_endowment + a.sold - endowment).abs() <= 1e-12 * (1.0 + endowment));
            prop_assert!(a.bought >= 0.0 && a.sold >= 0.0 && a.bought * a.sold == 0.0);
        }
    }

    #[test]
    fn welfare_components_sum_to_the_direct_form(
        trips in prop::collection::vec((2000.0f64..8000.0, 40.0f64..120.0, 0.3f64..0.7, 2.5f64..5.5, 0usize..61, 5.0f64..30.0, -3.0f64..6.0), 1..60),
        price in 0.0f64..8.0,
        endowment in 0.0f64..10.0,
        amplitude in 0.0f64..20.0,
        scheme in 0usize..4,
    ) {
        let shape = TollShape::Gaussian { amplitude, center: 80.0, spread: 18.0 };
        let profile = match scheme {
            0 => None,
            1 => Some(TollProfile::credits(shape, TollBasis::Distance)),
            2 => Some(TollProfile::credits(shape, TollBasis::Time)),
            _ => Some(TollProfile::money(shape, TollBasis::Distance)),
        };
        let scheme = profile.as_ref().map_or(Scheme::None, |p| p.scheme());
        let mut costs = Vec::new();
        let mut eps = Vec::new();
        let mut consumption = Vec::new();
        for &(l, t_star, sde, sdl, k, tt, e) in &trips {
            let tr = traveler(l, t_star, sde, sdl);
            let dep = tr.window[k];
            costs.push(generalized_cost(&tr, dep, tt, price, profile.as_ref()));
            eps.push(e);
            consumption.push(profile.as_ref().map_or(0.0, |p| p.charge(dep, l, tt)));
        }
        let tx = scheme.uses_credits().then(|| settle_consumption(&consumption, endowment, price).0);
        let w = welfare(&costs, &eps, tx.as_ref(), scheme);
        prop_assert!((w.w - w.w_direct).abs() <= 1e-9 * (1.0 + w.w.abs()), "{} vs {}", w.w, w.w_direct);
        prop_assert_eq!(w.tr, w.rc);
    }
}
