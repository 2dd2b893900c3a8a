//! Quasi-stationary distributions `ν_θ` for `θ ∈ (0, θ*]`.
//!
//! Two independent constructions:
//!
//! * the balance equations `ν Q = -θ ν` on `{1, 2, ...}` with `θ = q ν(1)`,
//!   run forward as a three-term recurrence;
//! * Taylor coefficients at zero of the closed-form generating function
//!   `g(s) = 1 + (1-s)^{θ/q} e^{as/q} (-1 + (a/q) ∫₀ˢ (1-x)^{-θ/q} e^{-ax/q} dx)`.
//!
//! Only `θ = θ*` gives a light (Poisson-like) tail. For `θ < θ*` the
//! distribution has a power-law tail `ν(j) ~ j^{-1-θ/q}`, which is why the
//! prefix variant exists.

use serde::Serialize;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad;
use crate::solver;

/// Default threshold below which a decreasing recurrence entry ends the vector.
pub const DEFAULT_EPS_TAIL: f64 = 1e-14;
/// Longest recurrence run before the tail is declared non-decaying.
pub const MAX_RECURRENCE_STATES: usize = 100_000;
/// Largest number of generating-function coefficients computed.
pub const MAX_GF_COEFFICIENTS: usize = 10_000;

/// Truncated distribution `(ν(1), ..., ν(N))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsdVector {
    pub theta: f64,
    /// `probs[k - 1] = ν(k)`.
    pub probs: Vec<f64>,
    pub truncation_n: usize,
    /// Geometric extrapolation of the mass beyond `truncation_n`; infinite
    /// when the last two entries do not decrease.
    pub tail_mass_estimate: f64,
}

impl QsdVector {
    fn from_probs(theta: f64, probs: Vec<f64>) -> Self {
        let n = probs.len();
        let tail = match n {
            0 | 1 => f64::INFINITY,
            _ => {
                let (last, prev) = (probs[n - 1], probs[n - 2]);
                let ratio = last / prev;
                if (0.0..1.0).contains(&ratio) {
                    last * ratio / (1.0 - ratio)
                } else if last == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        };
        QsdVector {
            theta,
            probs,
            truncation_n: n,
            tail_mass_estimate: tail,
        }
    }

    /// `ν(k)`, zero beyond the truncation point and at the absorbing state.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `|Σ ν + tail - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.sum() + self.tail_mass_estimate - 1.0).abs()
    }
}

/// One value of the generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratingFunctionPoint {
    pub s: f64,
    pub value: f64,
    pub abs_error_estimate: f64,
}

fn check_theta(params: &ModelParams, theta: f64) -> Result<()> {
    if theta > 0.0 && theta < params.q() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "quasi-stationary distributions need 0 < theta < q = {}, got {theta}",
            params.q()
        )))
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter {
            field,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

/// Runs the balance recurrence for at most `limit` states.
///
/// Returns the entries and whether the tail criterion stopped the run.
fn recurrence(
    params: &ModelParams,
    theta: f64,
    eps_tail: f64,
    limit: usize,
) -> Result<(Vec<f64>, bool)> {
    let (a, q) = (params.a(), params.q());
    let mut nu = Vec::with_capacity(limit.min(1024));
    nu.push(theta / q);
    if limit == 1 {
        return Ok((nu, false));
    }
    // state 1 has no inflow from the absorbing state
    nu.push(nu[0] * (a + q - theta) / (2.0 * q));
    loop {
        let j = nu.len();
        let (cur, prev) = (nu[j - 1], nu[j - 2]);
        if cur < 0.0 {
            return Err(Error::InvalidTheta { theta, index: j });
        }
        if cur < eps_tail && cur < prev {
            return Ok((nu, true));
        }
        if j >= limit {
            return Ok((nu, false));
        }
        let jf = j as f64;
        let next = ((a + jf * q - theta) * cur - a * prev) / ((jf + 1.0) * q);
        nu.push(next);
    }
}

/// `ν_θ` from the balance recurrence, stopped at the first decreasing entry
/// below `eps_tail`.
///
/// A negative entry means `θ > θ*` and is reported, never clamped. For
/// `θ < θ*` the tail decays like a power law and the run ends in a
/// convergence error; use [`qsd_recurrence_prefix`] there.
pub fn qsd_recurrence(params: &ModelParams, theta: f64, eps_tail: f64) -> Result<QsdVector> {
    check_theta(params, theta)?;
    check_positive("eps_tail", eps_tail)?;
    let (nu, stopped) = recurrence(params, theta, eps_tail, MAX_RECURRENCE_STATES)?;
    if !stopped {
        return Err(Error::Convergence {
            what: "quasi-stationary tail",
            partial: nu.iter().sum(),
            error_estimate: nu[nu.len() - 1],
        });
    }
    Ok(QsdVector::from_probs(theta, nu))
}

/// The first `n` entries of `ν_θ` from the balance recurrence.
///
/// The run ends early if the tail criterion of [`qsd_recurrence`] is met;
/// [`QsdVector::prob`] reads zero past that point. At `θ = θ*` entries past
/// that point would be rounding noise.
pub fn qsd_recurrence_prefix(
    params: &ModelParams,
    theta: f64,
    n: usize,
    eps_tail: f64,
) -> Result<QsdVector> {
    check_theta(params, theta)?;
    check_positive("eps_tail", eps_tail)?;
    if n == 0 {
        return Err(Error::Parameter {
            field: "n",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let (nu, _) = recurrence(params, theta, eps_tail, n)?;
    Ok(QsdVector::from_probs(theta, nu))
}

/// Largest `|(ν Q)(j) + θ ν(j)|` over the states whose balance equation is
/// fully covered by `probs`, together with `|θ - q ν(1)|`.
pub fn balance_residual(params: &ModelParams, theta: f64, probs: &[f64]) -> f64 {
    let (a, q) = (params.a(), params.q());
    let nu = |k: usize| if k == 0 { 0.0 } else { probs[k - 1] };
    let mut worst = match probs.first() {
        Some(&p1) => (theta - q * p1).abs(),
        None => return 0.0,
    };
    for j in 1..probs.len() {
        let jf = j as f64;
        let r = a * nu(j - 1) + (jf + 1.0) * q * nu(j + 1) - (a + jf * q) * nu(j) + theta * nu(j);
        worst = worst.max(r.abs());
    }
    worst
}

fn cauchy(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len().min(y.len());
    (0..n)
        .map(|k| (0..=k).map(|i| x[i] * y[k - i]).sum())
        .collect()
}

/// Taylor coefficients `g_0, ..., g_n` of the closed-form generating function.
///
/// Built from the series of its factors: `(1-s)^r`, `e^{αs}`, and the
/// term-wise antiderivative of `(1-x)^{-r} e^{-αx}`, with `r = θ/q` and
/// `α = a/q`.
pub fn gf_coefficients(params: &ModelParams, theta: f64, n: usize) -> Result<Vec<f64>> {
    check_theta(params, theta)?;
    if n > MAX_GF_COEFFICIENTS {
        return Err(Error::Parameter {
            field: "n",
            value: n as f64,
            reason: "exceeds the coefficient limit",
        });
    }
    let r = theta / params.q();
    let load = params.load();
    let len = n + 1;

    let mut one_minus_pow = vec![1.0; len];
    let mut exp_up = vec![1.0; len];
    let mut one_minus_neg_pow = vec![1.0; len];
    let mut exp_down = vec![1.0; len];
    for k in 0..n {
        let kf = k as f64;
        one_minus_pow[k + 1] = one_minus_pow[k] * (kf - r) / (kf + 1.0);
        exp_up[k + 1] = exp_up[k] * load / (kf + 1.0);
        one_minus_neg_pow[k + 1] = one_minus_neg_pow[k] * (kf + r) / (kf + 1.0);
        exp_down[k + 1] = -exp_down[k] * load / (kf + 1.0);
    }
    let integrand = cauchy(&one_minus_neg_pow, &exp_down);
    // -1 + α ∫₀ˢ integrand
    let mut bracket = vec![0.0; len];
    bracket[0] = -1.0;
    for k in 0..n {
        bracket[k + 1] = load * integrand[k] / (k as f64 + 1.0);
    }
    let prefactor = cauchy(&one_minus_pow, &exp_up);
    let mut g = cauchy(&prefactor, &bracket);
    g[0] += 1.0;
    Ok(g)
}

/// `ν_θ(1..=n)` read off the generating function.
pub fn qsd_from_gf(params: &ModelParams, theta: f64, n: usize) -> Result<QsdVector> {
    if n == 0 {
        return Err(Error::Parameter {
            field: "n",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let g = gf_coefficients(params, theta, n)?;
    Ok(QsdVector::from_probs(theta, g[1..].to_vec()))
}

/// The generating function of `ν_θ` at `s ∈ [0, 1)`.
///
/// Meaningful as a probability generating function only for `θ <= θ*`;
/// larger `θ` are accepted and then the value can exceed 1 near `s = 1`.
pub fn generating_function(
    params: &ModelParams,
    theta: f64,
    s: f64,
    tol: f64,
) -> Result<GeneratingFunctionPoint> {
    check_theta(params, theta)?;
    check_positive("tol", tol)?;
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!(
            "generating function needs 0 <= s < 1, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(GeneratingFunctionPoint {
            s,
            value: 0.0,
            abs_error_estimate: 0.0,
        });
    }
    let r = Dd::from(theta / params.q());
    let load = Dd::from(params.load());
    let one_minus_s = Dd::ONE - s;
    let one_minus_r = Dd::ONE - r;
    let exponent = Dd::ONE / one_minus_r;

    // ∫₀ˢ (1-x)^{-r} e^{-αx} dx with 1 - x = u^{1/(1-r)}
    let lower = one_minus_s.powf(one_minus_r);
    let outer = one_minus_s.powf(r) * (load * s).exp();
    let scale = (load * exponent * outer).hi;
    let inner = quad::integrate(
        |u| (-load * (Dd::ONE - u.powf(exponent))).exp(),
        lower,
        Dd::ONE,
        tol / scale,
        "generating function quadrature",
    )?;
    let bracket = load * exponent * inner.value - 1.0;
    let value = Dd::ONE + outer * bracket;
    Ok(GeneratingFunctionPoint {
        s,
        value: value.to_f64(),
        abs_error_estimate: inner.error_estimate * scale,
    })
}

/// The minimal quasi-stationary distribution `ν*`, the Yaglom limit.
///
/// θ* is refined to full floating-point precision first; the forward
/// recurrence is only benign at the exact minimal rate.
pub fn yaglom_reference(params: &ModelParams, eps_tail: f64) -> Result<QsdVector> {
    let theta_star = solver::theta_star_full_precision(params)?;
    qsd_recurrence(params, theta_star.theta, eps_tail)
}
