//! Globally adaptive Gauss–Legendre quadrature in double-double precision.
//!
//! Each panel carries the rule applied on the whole panel and on its two
//! halves; the difference of the two is the panel's error estimate and the
//! halves are what gets summed. The panel with the largest estimate is split
//! until the total estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::dd::{self, Dd};
use crate::error::{Error, Result};

const ORDER: usize = 20;
const MAX_PANELS: usize = 8_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Quadrature {
    pub value: Dd,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Positive nodes and weights of the `ORDER`-point rule on [-1, 1].
fn rule() -> &'static [(Dd, Dd)] {
    static RULE: OnceLock<Vec<(Dd, Dd)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

/// Returns (P_n(x), P_{n-1}(x)).
fn legendre(n: usize, x: Dd) -> (Dd, Dd) {
    let mut p_prev = Dd::ONE;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let next = (x * p * (2.0 * kf + 1.0) - p_prev * kf) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn legendre_rule(n: usize) -> Vec<(Dd, Dd)> {
    let nf = n as f64;
    (0..n / 2)
        .map(|i| {
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut x = Dd::from(guess);
            for _ in 0..8 {
                let (p, p_prev) = legendre(n, x);
                let dp = (x * p - p_prev) * nf / (x * x - 1.0);
                let step = p / dp;
                x -= step;
                if step.hi.abs() < 1e-33 {
                    break;
                }
            }
            let (p, p_prev) = legendre(n, x);
            let dp = (x * p - p_prev) * nf / (x * x - 1.0);
            let w = Dd::from(2.0) / ((Dd::ONE - x * x) * dp * dp);
            (x, w)
        })
        .collect()
}

fn apply<F: Fn(Dd) -> Dd>(f: &F, a: Dd, b: Dd) -> Dd {
    let center = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut acc = Dd::ZERO;
    for &(x, w) in rule() {
        let dx = half * x;
        acc += (f(center - dx) + f(center + dx)) * w;
    }
    acc * half
}

struct Panel {
    a: Dd,
    b: Dd,
    left: Dd,
    right: Dd,
    err: f64,
}

impl Panel {
    fn new<F: Fn(Dd) -> Dd>(f: &F, a: Dd, b: Dd, whole: Dd) -> Self {
        let mid = (a + b) * 0.5;
        let left = apply(f, a, mid);
        let right = apply(f, mid, b);
        let err = (whole - (left + right)).to_f64().abs();
        Panel {
            a,
            b,
            left,
            right,
            err,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn integrate<F>(f: F, a: Dd, b: Dd, tol: f64, what: &'static str) -> Result<Quadrature>
where
    F: Fn(Dd) -> Dd,
{
    let per_panel = 2 * ORDER;
    let whole = apply(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel::new(&f, a, b, whole));
    let mut evaluations = 3 * ORDER;

    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        let value = heap.iter().fold(Dd::ZERO, |acc, p| acc + p.left + p.right);
        if !value.is_finite() || !total_err.is_finite() {
            return Err(Error::Convergence {
                what,
                partial: value.to_f64(),
                error_estimate: f64::INFINITY,
            });
        }
        let floor = 64.0 * dd::EPS * value.hi.abs();
        if total_err <= tol.max(floor) {
            return Ok(Quadrature {
                value,
                error_estimate: total_err,
                evaluations,
            });
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::Convergence {
                what,
                partial: value.to_f64(),
                error_estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = (worst.a + worst.b) * 0.5;
        heap.push(Panel::new(&f, worst.a, mid, worst.left));
        heap.push(Panel::new(&f, mid, worst.b, worst.right));
        evaluations += 2 * per_panel;
    }
}
