//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`,
//! giving roughly 106 bits of significand. Only the operations needed by
//! the special functions are provided.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Unit roundoff of double-double arithmetic, 2^-104.
pub(crate) const EPS: f64 = 4.930_380_657_631_324e-32;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub(crate) const LN2: Dd = Dd::new(std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd::new(0.0, 0.0);
    pub const ONE: Dd = Dd::new(1.0, 0.0);

    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    /// Exact multiplication by a power of two.
    fn ldexp(self, exp: i32) -> Self {
        // split so that neither factor overflows on its own
        let half = exp / 2;
        let f1 = 2f64.powi(half);
        let f2 = 2f64.powi(exp - half);
        Dd::new(self.hi * f1 * f2, self.lo * f1 * f2)
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.79 {
            return Dd::new(f64::INFINITY, 0.0);
        }
        if self.hi < -745.2 {
            return Dd::ZERO;
        }
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        // x = m ln2 + 512 r, exp(x) = 2^m (1 + expm1(r))^512
        let m = (self.hi / LN2.hi).round();
        let r = (self - LN2 * m).ldexp(-9);

        let mut term = r;
        let mut sum = r;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term = term * r / k;
            sum += term;
            if term.hi.abs() <= EPS * sum.hi.abs() * 1e-2 || k > 30.0 {
                break;
            }
        }
        // (1 + s)^2 - 1 = 2s + s^2, applied nine times
        for _ in 0..9 {
            sum = sum * 2.0 + sum * sum;
        }
        (sum + 1.0).ldexp(m as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 {
                Dd::new(f64::NEG_INFINITY, 0.0)
            } else {
                Dd::new(f64::NAN, 0.0)
            };
        }
        if self.hi == 1.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        // two Newton steps on exp(y) = x from the double estimate
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    /// `self^e` for `self >= 0`.
    pub fn powf(self, e: Dd) -> Self {
        if self.hi == 0.0 {
            return if e.hi > 0.0 {
                Dd::ZERO
            } else if e.hi == 0.0 {
                Dd::ONE
            } else {
                Dd::new(f64::INFINITY, 0.0)
            };
        }
        (e * self.ln()).exp()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x, 0.0)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd::new(-self.hi, -self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::renorm(s1, s2 + t2)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        Dd::renorm(s1, s2 + self.lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: f64) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        Dd::renorm(p1, p2)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::renorm(p1, p2 + self.lo * b)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        Dd::renorm(q1, q2) + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from(b)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, hi: f64, lo: f64) -> f64 {
        let d = (a - Dd::new(hi, lo)).to_f64();
        (d / hi).abs()
    }

    #[test]
    fn exp_matches_reference() {
        assert!(rel(Dd::ONE.exp(), std::f64::consts::E, 1.4456468917292502e-16) < 1e-30);
        assert!(
            rel(
                Dd::from(10.0).exp(),
                22026.465794806718,
                -1.3780134700517372e-12
            ) < 1e-30
        );
        assert!(
            rel(
                Dd::from(-7.25).exp(),
                0.000710174388842549,
                3.546078199295509e-20
            ) < 1e-30
        );
        assert!(
            rel(
                Dd::from(700.0).exp(),
                1.0142320547350045e+304,
                1.6666571920734673e+287
            ) < 1e-29
        );
    }

    #[test]
    fn ln_and_pow_match_reference() {
        assert!(rel(Dd::from(2.0).ln(), LN2.hi, LN2.lo) < 1e-31);
        assert!(
            rel(
                Dd::from(10.0).ln(),
                std::f64::consts::LN_10,
                -2.1707562233822494e-16
            ) < 1e-31
        );
        assert!(
            rel(
                Dd::from(0.3).ln(),
                -1.2039728043259361,
                8.935521583403776e-17
            ) < 1e-31
        );
        let p = Dd::from(0.3).powf(Dd::from(-0.75));
        assert!(rel(p, 2.4669426816409508, 1.406828143668048e-16) < 1e-30);
    }

    #[test]
    fn division_round_trips() {
        let a = Dd::from(1.0) / Dd::from(3.0);
        let back = a * 3.0 - 1.0;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_edges() {
        assert_eq!(Dd::ZERO.exp(), Dd::ONE);
        assert_eq!(Dd::from(-800.0).exp(), Dd::ZERO);
        assert!(Dd::from(800.0).exp().hi.is_infinite());
        assert_eq!(Dd::ZERO.powf(Dd::from(0.5)), Dd::ZERO);
    }
}
