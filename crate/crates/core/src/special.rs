//! The series `γ̄(s, x) = Σ_k (-x)^k / ((k + s) k!)`, its incomplete-gamma
//! integral form and the integral `F(s, x) = -x ∫₀¹ (1-y)^s e^{xy} dy`.
//!
//! The series and the two integrals are evaluated along unrelated routes
//! (term recurrence versus quadrature after a change of variables), so the
//! relations between them can be checked numerically rather than assumed.
//! Internally everything runs in double-double arithmetic; the public values
//! are rounded to `f64`.

use serde::Serialize;

use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::quad;

/// Calls closer than this to a pole of the series are rejected.
pub const POLE_GUARD: f64 = 1e-8;
/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 10_000;
/// Largest `|x|` accepted by the series.
pub const MAX_ABS_X: f64 = 700.0;

/// A computed value together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// Series terms summed or integrand evaluations performed.
    pub terms_or_nodes_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DdEval {
    pub value: Dd,
    pub err: f64,
    pub count: usize,
}

impl From<DdEval> for EvalResult {
    fn from(e: DdEval) -> Self {
        EvalResult {
            value: e.value.to_f64(),
            abs_error_estimate: e.err,
            terms_or_nodes_used: e.count,
        }
    }
}

/// Nearest element of `{0, -1, -2, ...}`.
pub fn nearest_pole(s: f64) -> f64 {
    if s >= 0.0 {
        0.0
    } else {
        s.round().min(0.0)
    }
}

fn check_pole(s: f64) -> Result<()> {
    let pole = nearest_pole(s);
    let distance = (s - pole).abs();
    if distance < POLE_GUARD {
        return Err(Error::Pole { s, pole, distance });
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
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

fn check_finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            field,
            value,
            reason: "must be finite",
        })
    }
}

/// Direct summation of `Σ_k (-x)^k / ((k + s) k!)`.
///
/// Terms are produced by the recurrence `p_{k+1} = p_k (-x) / (k + 1)` with
/// `p_0 = 1`, so no power or factorial is ever formed. Once `k + 2 > |x|`
/// the remaining tail is bounded by a geometric envelope,
///
/// ```text
/// |tail| <= |p_{k+1}| / (m (1 - |x| / (k + 2)))
/// ```
///
/// where `m` is a lower bound on `|j + s|` over the tail.
pub(crate) fn bargamma_dd(s: f64, x: f64, tol: f64) -> Result<DdEval> {
    check_finite("s", s)?;
    check_finite("x", x)?;
    check_tol(tol)?;
    if x.abs() > MAX_ABS_X {
        return Err(Error::Domain(format!(
            "|x| = {} exceeds the series limit {MAX_ABS_X}",
            x.abs()
        )));
    }
    check_pole(s)?;

    let pole_distance = (s - s.round()).abs();
    let s_dd = Dd::from(s);
    let mut p = Dd::ONE;
    let mut sum = Dd::ZERO;
    let mut abs_sum = 0.0f64;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let term = p / (s_dd + kf);
        sum += term;
        abs_sum += term.hi.abs();
        p = p * (-x) / (kf + 1.0);

        let ratio = x.abs() / (kf + 2.0);
        if ratio >= 1.0 {
            continue;
        }
        let next = kf + 1.0 + s;
        let min_denominator = if next > 0.0 { next } else { pole_distance };
        let tail = p.hi.abs() / min_denominator / (1.0 - ratio);
        if tail <= 0.5 * tol {
            let rounding = 4.0 * (kf + 1.0) * dd::EPS * abs_sum;
            if rounding > 0.5 * tol {
                return Err(Error::Convergence {
                    what: "series (cancellation)",
                    partial: sum.to_f64(),
                    error_estimate: tail + rounding,
                });
            }
            return Ok(DdEval {
                value: sum,
                err: tail + rounding,
                count: k + 1,
            });
        }
    }
    Err(Error::Convergence {
        what: "series",
        partial: sum.to_f64(),
        error_estimate: f64::INFINITY,
    })
}

/// `γ̄(s, x)` summed from its defining series.
pub fn bargamma_series(s: f64, x: f64, tol: f64) -> Result<EvalResult> {
    bargamma_dd(s, x, tol).map(Into::into)
}

/// `x^{-s} ∫₀ˣ t^{s-1} e^{-t} dt` by quadrature, for `s > 0` and `x > 0`.
///
/// With `t = x u^{1/s}` the integral becomes `(1/s) ∫₀¹ exp(-x u^{1/s}) du`,
/// whose integrand is bounded on the closed interval.
pub fn gamma_lower_scaled(s: f64, x: f64, tol: f64) -> Result<EvalResult> {
    check_finite("s", s)?;
    check_finite("x", x)?;
    check_tol(tol)?;
    if s <= 0.0 || x <= 0.0 {
        return Err(Error::Domain(format!(
            "integral form needs s > 0 and x > 0, got s = {s}, x = {x}"
        )));
    }
    let inv_s = Dd::ONE / Dd::from(s);
    let neg_x = Dd::from(-x);
    let q = quad::integrate(
        |u| (neg_x * u.powf(inv_s)).exp(),
        Dd::ZERO,
        Dd::ONE,
        tol * s,
        "lower incomplete gamma quadrature",
    )?;
    Ok(EvalResult {
        value: (q.value * inv_s).to_f64(),
        abs_error_estimate: q.error_estimate / s,
        terms_or_nodes_used: q.evaluations,
    })
}

pub(crate) fn big_f_dd(s: f64, x: f64, tol: f64) -> Result<DdEval> {
    check_finite("s", s)?;
    check_finite("x", x)?;
    check_tol(tol)?;
    if s <= -1.0 {
        return Err(Error::Domain(format!("F(s, x) needs s > -1, got s = {s}")));
    }
    if x == 0.0 {
        return Ok(DdEval {
            value: Dd::ZERO,
            err: 0.0,
            count: 0,
        });
    }
    let x_dd = Dd::from(x);
    if s >= 0.0 {
        let s_dd = Dd::from(s);
        let q = quad::integrate(
            |y| (Dd::ONE - y).powf(s_dd) * (x_dd * y).exp(),
            Dd::ZERO,
            Dd::ONE,
            tol / x.abs(),
            "F quadrature",
        )?;
        Ok(DdEval {
            value: -(x_dd * q.value),
            err: q.error_estimate * x.abs(),
            count: q.evaluations,
        })
    } else {
        // 1 - y = u^p with p = 1/(s+1): (1-y)^s dy = p du
        let p = Dd::ONE / (Dd::from(s) + 1.0);
        let scale = x.abs() * p.hi;
        let q = quad::integrate(
            |u| (x_dd * (Dd::ONE - u.powf(p))).exp(),
            Dd::ZERO,
            Dd::ONE,
            tol / scale,
            "F quadrature",
        )?;
        Ok(DdEval {
            value: -(x_dd * p * q.value),
            err: q.error_estimate * scale,
            count: q.evaluations,
        })
    }
}

/// `F(s, x) = -x ∫₀¹ (1-y)^s e^{xy} dy` for `s > -1`.
///
/// For `-1 < s < 0` the endpoint singularity at `y = 1` is removed by
/// `1 - y = u^{1/(s+1)}` before integrating.
pub fn big_f(s: f64, x: f64, tol: f64) -> Result<EvalResult> {
    big_f_dd(s, x, tol).map(Into::into)
}

/// `|F(s, x) - (1 - s e^x γ̄(s, x))|`, each side from its own route.
///
/// The series is summed to `tol / max(1, |s| e^x)` so that both sides carry
/// an error of at most `tol`.
pub fn identity_residual(s: f64, x: f64, tol: f64) -> Result<f64> {
    check_finite("s", s)?;
    check_finite("x", x)?;
    if s <= -1.0 {
        return Err(Error::Domain(format!(
            "identity is checked for s > -1, got s = {s}"
        )));
    }
    check_pole(s)?;
    let f = big_f_dd(s, x, tol)?;
    let exp_x = Dd::from(x).exp();
    let amplification = (s.abs() * exp_x.hi).max(1.0);
    let g = bargamma_dd(s, x, tol / amplification)?;
    let rhs = Dd::ONE - Dd::from(s) * exp_x * g.value;
    Ok((f.value - rhs).to_f64().abs())
}
