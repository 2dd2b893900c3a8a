//! The minimal survival rate θ* from both of its characterizations.
//!
//! * As the root in `(0, q)` of `θ ↦ γ̄(-θ/q, -a/q)`, the first singularity
//!   of the absorption-time transform.
//! * As the solution in `(0, q)` of `(a/q) ∫₀¹ (1-x)^{-θ/q} e^{-ax/q} dx = 1`.
//!
//! Both depend on the parameters only through `a/q` and `θ/q`, so the root
//! search runs on the normalized rate `r = θ/q ∈ (0, 1)` and is rescaled on
//! output. The integral map is integrated directly and never routed through
//! the series identity.

use serde::Serialize;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad;
use crate::special;

/// Default root tolerance, relative to `q`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Initial distance of the bracket from the ends of `(0, q)`, relative to `q`.
pub const BRACKET_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    SeriesRoot,
    IntegralRoot,
    SimulationFit,
}

/// A survival rate and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalRate {
    pub theta: f64,
    pub method: Method,
    /// `|f(theta)|` for the characteristic the root was taken of.
    pub residual: f64,
    /// Width of the final bracket, in rate units.
    pub bracket_width: f64,
}

/// One value of `θ ↦ (a/q) ∫₀¹ (1-x)^{-θ/q} e^{-ax/q} dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneMapValue {
    pub theta: f64,
    pub value: f64,
    pub abs_error_estimate: f64,
}

/// Outcome of solving both characterizations and comparing the roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub series: SurvivalRate,
    pub integral: SurvivalRate,
    pub difference: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check_solver_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter {
            field: "tol",
            value: tol,
            reason: "must be finite and strictly positive",
        })
    }
}

/// Tolerance handed to the series when the caller's root tolerance is `tol`.
fn series_tol(tol: f64) -> f64 {
    (tol * 1e-3).max(1e-30)
}

/// `γ̄(-θ/q, -a/q)`: negative below θ*, positive above.
pub fn series_characteristic(params: &ModelParams, theta: f64, tol: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < params.q()) {
        return Err(Error::Domain(format!(
            "series characteristic needs 0 < theta < q = {}, got {theta}",
            params.q()
        )));
    }
    let value = normalized_series(params.load(), theta / params.q(), tol)?;
    Ok(value)
}

fn normalized_series(load: f64, r: f64, tol: f64) -> Result<f64> {
    // the k = 0 term is -1/r; asking for more than ~1e-22 of it relative
    // only trips the cancellation check
    let tol = tol.max(1e-22 / r);
    Ok(special::bargamma_dd(-r, -load, tol)?.value.to_f64())
}

/// `(a/q) ∫₀¹ (1-x)^{-θ/q} e^{-ax/q} dx` for `0 <= θ < q`.
///
/// The endpoint singularity is removed with `1 - x = u^{1/(1-θ/q)}`, after
/// which the integrand is `e^{-(a/q)(1 - u^{1/(1-θ/q)})}` times a constant.
pub fn integral_characteristic(
    params: &ModelParams,
    theta: f64,
    tol: f64,
) -> Result<MonotoneMapValue> {
    check_solver_tol(tol)?;
    if !(theta >= 0.0 && theta < params.q()) {
        return Err(Error::Domain(format!(
            "integral characteristic needs 0 <= theta < q = {}, got {theta}",
            params.q()
        )));
    }
    let (value, err) = normalized_map(params.load(), theta / params.q(), tol)?;
    Ok(MonotoneMapValue {
        theta,
        value: value.to_f64(),
        abs_error_estimate: err,
    })
}

fn normalized_map(load: f64, r: f64, tol: f64) -> Result<(Dd, f64)> {
    let exponent = Dd::ONE / (Dd::ONE - Dd::from(r));
    let neg_load = Dd::from(-load);
    let prefactor = Dd::from(load) * exponent;
    let q = quad::integrate(
        |u| (neg_load * (Dd::ONE - u.powf(exponent))).exp(),
        Dd::ZERO,
        Dd::ONE,
        tol / prefactor.hi,
        "survival map quadrature",
    )?;
    Ok((prefactor * q.value, q.error_estimate * prefactor.hi))
}

pub(crate) struct Root {
    x: f64,
    residual: f64,
    width: f64,
}

/// Bracketed root of an increasing `f` on `(0, 1)`.
///
/// Illinois-modified false position, falling back to bisection whenever
/// two consecutive steps fail to halve the bracket. Stops when the bracket
/// is narrower than `tol * min(1, lo)` or cannot shrink further.
fn increasing_root<F>(mut f: F, tol: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut lo = BRACKET_GUARD;
    let mut hi = 1.0 - BRACKET_GUARD;
    let mut f_lo = f(lo)?;
    // the root can sit below the guard when a/q is large
    while f_lo > 0.0 && lo > 1.5 * special::POLE_GUARD {
        hi = lo;
        lo = (lo * 0.1).max(special::POLE_GUARD);
        f_lo = f(lo)?;
    }
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            residual: 0.0,
            width: 0.0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            residual: 0.0,
            width: 0.0,
        });
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }

    // weights used by the Illinois step; halved when an end is retained
    let (mut w_lo, mut w_hi) = (f_lo, f_hi);
    let mut stalled = 0;
    let mut last_side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        let mid = lo + 0.5 * width;
        if width <= tol * lo.min(1.0) || mid <= lo || mid >= hi {
            break;
        }
        let secant = lo - w_lo * width / (w_hi - w_lo);
        let x = if stalled < 2 && secant > lo && secant < hi {
            secant
        } else {
            stalled = 0;
            mid
        };
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(Root {
                x,
                residual: 0.0,
                width: 0.0,
            });
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            w_lo = fx;
            if last_side == -1 {
                w_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            f_hi = fx;
            w_hi = fx;
            if last_side == 1 {
                w_lo *= 0.5;
            }
            last_side = 1;
        }
        if hi - lo > 0.5 * width {
            stalled += 1;
        } else {
            stalled = 0;
        }
    }
    let (x, residual) = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo.abs())
    } else {
        (hi, f_hi.abs())
    };
    Ok(Root {
        x,
        residual,
        width: hi - lo,
    })
}

pub(crate) fn solve_series_normalized(load: f64, tol: f64) -> Result<Root> {
    let stol = series_tol(tol);
    increasing_root(|r| normalized_series(load, r, stol), tol)
}

/// θ* as the root of the series characteristic.
pub fn solve_theta_star_series(params: &ModelParams, tol: f64) -> Result<SurvivalRate> {
    check_solver_tol(tol)?;
    let root = solve_series_normalized(params.load(), tol)?;
    Ok(SurvivalRate {
        theta: root.x * params.q(),
        method: Method::SeriesRoot,
        residual: root.residual,
        bracket_width: root.width * params.q(),
    })
}

/// θ* refined until the bracket reaches adjacent floating-point numbers.
pub fn theta_star_full_precision(params: &ModelParams) -> Result<SurvivalRate> {
    let root = increasing_root(|r| normalized_series(params.load(), r, 1e-30), 0.0)?;
    Ok(SurvivalRate {
        theta: root.x * params.q(),
        method: Method::SeriesRoot,
        residual: root.residual,
        bracket_width: root.width * params.q(),
    })
}

/// θ* as the solution of the integral equation `map(θ) = 1`.
pub fn solve_theta_star_integral(params: &ModelParams, tol: f64) -> Result<SurvivalRate> {
    check_solver_tol(tol)?;
    let load = params.load();
    let qtol = (tol * 1e-2).max(1e-28);
    let root = increasing_root(
        |r| Ok((normalized_map(load, r, qtol)?.0 - 1.0).to_f64()),
        tol,
    )?;
    Ok(SurvivalRate {
        theta: root.x * params.q(),
        method: Method::IntegralRoot,
        residual: root.residual,
        bracket_width: root.width * params.q(),
    })
}

/// Solves both characterizations and checks `|θ_series - θ_integral| <= 4 tol q`.
pub fn certify_equivalence(params: &ModelParams, tol: f64) -> Result<EquivalenceReport> {
    let series = solve_theta_star_series(params, tol)?;
    let integral = solve_theta_star_integral(params, tol)?;
    let difference = (series.theta - integral.theta).abs();
    let threshold = 4.0 * tol * params.q();
    Ok(EquivalenceReport {
        series,
        integral,
        difference,
        threshold,
        pass: difference <= threshold,
    })
}
