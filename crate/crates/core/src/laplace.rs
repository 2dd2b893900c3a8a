//! Moment generating function of the absorption time started from state 1,
//!
//! ```text
//! E₁[e^{θT}] = (a - θ)/a - 1 / ((a/q) e^{-a/q} γ̄(-θ/q, -a/q)),
//! ```
//!
//! finite for `θ < θ*` with a simple pole at θ*.

use serde::Serialize;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver;
use crate::special;

/// Distance from θ*, relative to `q`, inside which evaluation is refused.
pub const SINGULARITY_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfPoint {
    pub theta: f64,
    pub value: f64,
    pub abs_error_estimate: f64,
}

/// The closed form at any `θ` that is not a pole, without checking θ*.
///
/// Beyond θ* this is the analytic continuation of the formula, not a
/// moment generating function. `θ = 0` returns the limit 1.
pub fn mgf_closed_form(params: &ModelParams, theta: f64, tol: f64) -> Result<MgfPoint> {
    if !theta.is_finite() {
        return Err(Error::Parameter {
            field: "theta",
            value: theta,
            reason: "must be finite",
        });
    }
    if theta == 0.0 {
        return Ok(MgfPoint {
            theta,
            value: 1.0,
            abs_error_estimate: 0.0,
        });
    }
    let load = params.load();
    let g = special::bargamma_dd(-theta / params.q(), -load, tol * 1e-3)?;
    let weight = Dd::from(load) * Dd::from(-load).exp();
    let denom = weight * g.value;
    let value = (Dd::from(params.a()) - theta) / params.a() - Dd::ONE / denom;
    let sensitivity = 1.0 / (weight.hi * g.value.hi * g.value.hi).abs();
    Ok(MgfPoint {
        theta,
        value: value.to_f64(),
        abs_error_estimate: g.err * sensitivity,
    })
}

/// `E₁[e^{θT}]` for `θ < θ* - guard`, with θ* already known.
pub fn mgf_absorption_with(
    params: &ModelParams,
    theta_star: f64,
    theta: f64,
    tol: f64,
) -> Result<MgfPoint> {
    if theta >= theta_star {
        return Err(Error::Domain(format!(
            "E[exp(theta T)] is infinite for theta = {theta} >= theta* = {theta_star}"
        )));
    }
    let guard = SINGULARITY_GUARD * params.q();
    if theta > theta_star - guard {
        return Err(Error::NearSingularity {
            theta,
            theta_star,
            guard,
        });
    }
    mgf_closed_form(params, theta, tol)
}

/// `E₁[e^{θT}]`, solving for θ* first.
pub fn mgf_absorption(params: &ModelParams, theta: f64, tol: f64) -> Result<MgfPoint> {
    let theta_star = solver::solve_theta_star_series(params, 1e-14)?.theta;
    mgf_absorption_with(params, theta_star, theta, tol)
}

/// `E₁[T] = (e^{a/q} - 1) / a`, the slope of the transform at zero.
pub fn mean_absorption_time(params: &ModelParams) -> f64 {
    params.load().exp_m1() / params.a()
}
