use proptest::prelude::*;

use mminf_qsd::{laplace, solver, special, ModelParams};

fn p(a: f64, q: f64) -> ModelParams {
    ModelParams::new(a, q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theta_star_scales_with_time(load in 0.05f64..15.0, q in 0.1f64..10.0, c in 0.1f64..10.0) {
        let base = solver::solve_theta_star_series(&p(load * q, q), 1e-13).unwrap().theta;
        let scaled = solver::solve_theta_star_series(&p(c * load * q, c * q), 1e-13).unwrap().theta;
        prop_assert!((scaled - c * base).abs() <= 1e-11 * c * q, "{scaled} vs {}", c * base);
        prop_assert!(base > 0.0 && base < q);
    }

    #[test]
    fn identity_holds_off_the_poles(s in -0.95f64..5.0, x in -10.0f64..10.0) {
        prop_assume!(s.abs() > 1e-3);
        let res = special::identity_residual(s, x, 1e-12).unwrap();
        prop_assert!(res <= 1e-10, "s {s} x {x}: {res}");
    }

    #[test]
    fn map_is_increasing(load in 0.05f64..12.0, r1 in 0.0f64..0.98, r2 in 0.0f64..0.98) {
        prop_assume!((r1 - r2).abs() > 1e-6);
        let params = p(load, 1.0);
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let m_lo = solver::integral_characteristic(&params, lo, 1e-14).unwrap();
        let m_hi = solver::integral_characteristic(&params, hi, 1e-14).unwrap();
        prop_assert!(m_lo.value < m_hi.value);
    }

    #[test]
    fn characteristic_changes_sign_at_root(load in 0.05f64..12.0, frac in 0.05f64..0.95) {
        let params = p(load, 1.0);
        let theta_star = solver::solve_theta_star_series(&params, 1e-14).unwrap().theta;
        let below = frac * theta_star;
        let above = theta_star + frac * (1.0 - theta_star);
        prop_assert!(solver::series_characteristic(&params, below, 1e-14).unwrap() < 0.0);
        prop_assert!(solver::series_characteristic(&params, above, 1e-14).unwrap() > 0.0);
        let map_below = solver::integral_characteristic(&params, below, 1e-14).unwrap().value;
        let map_above = solver::integral_characteristic(&params, above, 1e-14).unwrap().value;
        prop_assert!(map_below < 1.0 && map_above > 1.0);
    }

    #[test]
    fn characteristic_splits_into_pole_and_positive_part(load in 0.05f64..10.0, r in 0.01f64..0.99) {
        // -1/r plus terms that are all positive for 0 < r < 1
        let mut term = 1.0;
        let mut positive = 0.0;
        let mut k = 1.0;
        loop {
            term *= load / k;
            positive += term / (k - r);
            if term < 1e-18 * positive && k > 2.0 * load {
                break;
            }
            k += 1.0;
        }
        let expected = positive - 1.0 / r;
        let ours = solver::series_characteristic(&p(load, 1.0), r, 1e-15).unwrap();
        let scale = positive.max(1.0 / r);
        prop_assert!((ours - expected).abs() <= 1e-13 * scale, "{ours} vs {expected}");
    }

    #[test]
    fn quadrature_error_stays_within_tolerance(s in -0.9f64..4.0, x in -8.0f64..8.0) {
        let loose = special::big_f(s, x, 1e-8).unwrap();
        let tight = special::big_f(s, x, 1e-15).unwrap();
        let actual = (loose.value - tight.value).abs();
        prop_assert!(actual <= 1e-8, "s {s} x {x}: error {actual}");
        prop_assert!(actual <= loose.abs_error_estimate.max(1e-14 * tight.value.abs()) + 1e-15,
            "s {s} x {x}: error {actual} above estimate {}", loose.abs_error_estimate);
    }

    #[test]
    fn mgf_time_change(load in 0.1f64..5.0, c in 0.2f64..5.0, frac in -2.0f64..0.9) {
        let base = p(load, 1.0);
        let scaled = p(c * load, c);
        let theta_star = solver::solve_theta_star_series(&base, 1e-14).unwrap().theta;
        let theta = frac * theta_star;
        let m = laplace::mgf_closed_form(&base, theta, 1e-14).unwrap().value;
        let mc = laplace::mgf_closed_form(&scaled, c * theta, 1e-14).unwrap().value;
        prop_assert!(((m - mc) / m).abs() < 1e-10, "{m} vs {mc}");
    }
}

#[test]
fn series_and_integral_agree_on_grid() {
    for s in [0.25, 0.5, 1.0, 2.0, 5.0] {
        for x in [0.1, 1.0, 5.0, 20.0] {
            let series = special::bargamma_series(s, x, 1e-15).unwrap();
            let integral = special::gamma_lower_scaled(s, x, 1e-15).unwrap();
            let diff = (series.value - integral.value).abs();
            assert!(
                diff <= 2e-15 + 4.0 * f64::EPSILON * integral.value,
                "s {s} x {x}: {} vs {}",
                series.value,
                integral.value
            );
        }
    }
}

#[test]
fn mgf_increases_towards_the_pole() {
    let params = p(1.0, 1.0);
    let theta_star = solver::solve_theta_star_series(&params, 1e-14)
        .unwrap()
        .theta;
    let mut last = 0.0;
    for i in 0..=40 {
        let theta = -2.0 + (theta_star - laplace::SINGULARITY_GUARD - -2.0) * f64::from(i) / 40.0;
        let v = laplace::mgf_absorption_with(&params, theta_star, theta, 1e-13)
            .unwrap()
            .value;
        assert!(v > last, "not increasing at theta = {theta}");
        last = v;
    }
    assert!(last > 1e3);
}

#[test]
fn mgf_pole_sits_at_theta_star() {
    for (a, q) in [(1.0, 1.0), (3.0, 2.0), (0.2, 0.5)] {
        let params = p(a, q);
        let theta_star = solver::solve_theta_star_series(&params, 1e-14)
            .unwrap()
            .theta;
        let step = 1e-7 * q;
        let mut prev = laplace::mgf_closed_form(&params, theta_star - 100.0 * step, 1e-15)
            .unwrap()
            .value;
        let mut crossing = None;
        for i in -99..=100 {
            let theta = theta_star + f64::from(i) * step;
            let v = laplace::mgf_closed_form(&params, theta, 1e-15)
                .unwrap()
                .value;
            if prev > 0.0 && v < 0.0 {
                crossing = Some(theta - 0.5 * step);
                break;
            }
            prev = v;
        }
        let located = crossing.expect("no sign change near theta*");
        assert!((located - theta_star).abs() <= 1e-6 * q);
    }
}

#[test]
fn mgf_refuses_at_and_beyond_theta_star() {
    let params = p(2.0, 1.0);
    let theta_star = solver::solve_theta_star_series(&params, 1e-14)
        .unwrap()
        .theta;
    assert!(laplace::mgf_absorption(&params, theta_star, 1e-12).is_err());
    assert!(laplace::mgf_absorption(&params, theta_star + 0.1, 1e-12).is_err());
}
