//! Comparisons against independent implementations: a 300-bit fixed-point
//! series bisection for the survival rate and an f64 tanh-sinh quadrature
//! for the integral map.

#![allow(clippy::excessive_precision)]

use num_bigint::BigInt;

use mminf_qsd::{qsd, solver, special, ModelParams};

const BITS: u32 = 300;

fn fixed(x: f64) -> BigInt {
    assert!(x.is_finite());
    if x == 0.0 {
        return BigInt::from(0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let (mantissa, e) = if exp == 0 {
        (bits & ((1u64 << 52) - 1), -1074)
    } else {
        ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), exp - 1075)
    };
    let shift = e + BITS as i32;
    assert!(shift >= 0, "{x} is too small for the fixed-point scale");
    BigInt::from(sign) * (BigInt::from(mantissa) << shift as u32)
}

fn one() -> BigInt {
    BigInt::from(1) << BITS
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> BITS
}

fn div(a: &BigInt, b: &BigInt) -> BigInt {
    (a << BITS) / b
}

/// Sign of `r Σ_{k≥1} α^k / (k! (k - r)) - 1`, which is `-r γ̄(-r, -α)`
/// up to the positive factor, so negative below the root and positive above.
fn series_sign(r: f64, alpha: f64) -> bool {
    let (r, alpha_fp) = (fixed(r), fixed(alpha));
    let eps = BigInt::from(1) << 40;
    let mut term = one();
    let mut sum = BigInt::from(0);
    let mut k = 1u32;
    loop {
        term = mul(&term, &alpha_fp) / k;
        let kk = BigInt::from(k) << BITS;
        sum += div(&term, &(kk - &r));
        if term < eps && f64::from(k) > 2.0 * alpha {
            break;
        }
        k += 1;
    }
    mul(&r, &sum) > one()
}

fn bisect_theta_star(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12f64, 1.0 - 1e-12);
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if series_sign(mid, alpha) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn fixed_point_bisection_reproduces_goldens() {
    let goldens = [
        (1.0, 0.450_265_027_495_981_184_792_373_332_266),
        (5.0, 0.026_057_566_220_619_243_717_749_563_412),
        (0.01, 0.990_098_528_534_585_909_114_275_310_464),
        (10.0, 0.000_401_689_546_747_948_036_754_681_708_832),
    ];
    for (alpha, golden) in goldens {
        let oracle = bisect_theta_star(alpha);
        assert!(
            (oracle - golden).abs() <= 4.0 * f64::EPSILON * golden,
            "alpha {alpha}: {oracle} vs {golden}"
        );
    }
}

#[test]
fn solver_matches_fixed_point_oracle() {
    for alpha in [0.1, 0.5, 2.0, 3.7, 8.0, 15.0] {
        let oracle = bisect_theta_star(alpha);
        for q in [1.0, 0.25, 4.0] {
            let params = ModelParams::new(alpha * q, q).unwrap();
            let theta = solver::solve_theta_star_series(&params, 1e-13)
                .unwrap()
                .theta;
            assert!(
                (theta / q - oracle).abs() <= 1e-12,
                "a={} q={q}: {} vs {oracle}",
                alpha * q,
                theta / q
            );
        }
    }
}

/// Tanh-sinh rule on [0, 1] that hands the integrand both `x` and `1 - x`,
/// so endpoint singularities at 1 are evaluated without cancellation.
fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, h: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let n = (6.5 / h) as i64;
    for i in -n..=n {
        let t = i as f64 * h;
        let u = half_pi * t.sinh();
        let x = 1.0 / (1.0 + (-2.0 * u).exp());
        let one_minus_x = 1.0 / (1.0 + (2.0 * u).exp());
        if x <= 0.0 || one_minus_x <= 0.0 {
            continue;
        }
        let weight = half_pi * t.cosh() * x * one_minus_x * 2.0;
        sum += weight * f(x, one_minus_x);
    }
    sum * h
}

fn map_oracle(alpha: f64, r: f64) -> f64 {
    alpha * tanh_sinh(|x, y| y.powf(-r) * (-alpha * x).exp(), 1.0 / 64.0)
}

#[test]
fn integral_characteristic_matches_tanh_sinh() {
    for alpha in [0.1, 1.0, 4.0, 12.0] {
        let params = ModelParams::new(alpha, 1.0).unwrap();
        for r in [0.0, 0.1, 0.45, 0.8, 0.95] {
            let ours = solver::integral_characteristic(&params, r, 1e-14)
                .unwrap()
                .value;
            let oracle = map_oracle(alpha, r);
            assert!(
                ((ours - oracle) / oracle).abs() < 1e-12,
                "alpha {alpha} r {r}: {ours} vs {oracle}"
            );
        }
    }
}

#[test]
fn big_f_matches_tanh_sinh() {
    for s in [-0.9, -0.5, -0.1, 0.3, 2.0] {
        for x in [-8.0, -1.0, 0.5, 3.0] {
            let oracle = -x
                * tanh_sinh(
                    |y, one_minus_y| one_minus_y.powf(s) * (x * y).exp(),
                    1.0 / 64.0,
                );
            let ours = special::big_f(s, x, 1e-14).unwrap();
            let scale = oracle.abs().max(1.0);
            assert!(
                (ours.value - oracle).abs() <= 1e-12 * scale,
                "s {s} x {x}: {} vs {oracle}",
                ours.value
            );
        }
    }
}

/// `γ(s, x) / x^s` for `s, x > 0` via the positive-term expansion
/// `x^{-s} e^{-x} Σ x^{s+n} / (s (s+1) ... (s+n))`, all terms positive.
fn lower_gamma_scaled_oracle(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut n = 1.0;
    while term > 1e-18 * sum {
        term *= x / (s + n);
        sum += term;
        n += 1.0;
    }
    (-x).exp() * sum
}

#[test]
fn series_matches_positive_term_expansion() {
    for s in [0.2, 1.0, 2.5, 7.0] {
        for x in [0.1, 1.0, 5.0, 15.0] {
            let oracle = lower_gamma_scaled_oracle(s, x);
            let ours = special::gamma_lower_scaled(s, x, 1e-15).unwrap();
            let diff = (ours.value - oracle).abs();
            let slack = 1e-15 * oracle;
            assert!(
                diff <= 1e-15 + slack,
                "s {s} x {x}: {} vs {oracle}",
                ours.value
            );
            assert!(
                diff <= ours.abs_error_estimate + slack,
                "s {s} x {x}: estimate too small"
            );
        }
    }
}

#[test]
fn yaglom_matches_qsd_from_minimal_root() {
    for alpha in [0.5, 3.0] {
        let params = ModelParams::new(alpha, 1.0).unwrap();
        let nu = qsd::yaglom_reference(&params, qsd::DEFAULT_EPS_TAIL).unwrap();
        let oracle = bisect_theta_star(alpha);
        assert!((nu.prob(1) - oracle).abs() < 1e-14);
        assert!(nu.normalization_error() < 1e-12);
    }
}
