//! Queue parameters and the birth–death generator.

use serde::Serialize;

use crate::error::{Error, Result};

/// Arrival rate `a` and per-customer service rate `q` of the queue.
///
/// The only way to build one is [`ModelParams::new`], so every value in
/// circulation has both rates finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    a: f64,
    q: f64,
}

impl ModelParams {
    pub fn new(a: f64, q: f64) -> Result<Self> {
        check_rate("a", a)?;
        check_rate("q", q)?;
        Ok(ModelParams { a, q })
    }

    /// Arrival rate.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Service rate per customer.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Load `a / q`, the only combination the survival rate depends on.
    pub fn load(&self) -> f64 {
        self.a / self.q
    }

    /// Total rate of leaving state `i`; zero in the absorbing state.
    pub fn rate_out_of(&self, i: u64) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.a + i as f64 * self.q
        }
    }

    /// Generator entry `Q(from, to)`.
    pub fn rate(&self, from: u64, to: u64) -> f64 {
        if from == 0 {
            return 0.0;
        }
        if to == from + 1 {
            self.a
        } else if to + 1 == from {
            from as f64 * self.q
        } else if to == from {
            -self.rate_out_of(from)
        } else {
            0.0
        }
    }

    /// Nonzero generator entries out of `i`, the diagonal included.
    pub fn generator_row(&self, i: u64) -> Vec<GeneratorEntry> {
        if i == 0 {
            return Vec::new();
        }
        vec![
            GeneratorEntry {
                from_state: i,
                to_state: i - 1,
                rate: i as f64 * self.q,
            },
            GeneratorEntry {
                from_state: i,
                to_state: i,
                rate: -self.rate_out_of(i),
            },
            GeneratorEntry {
                from_state: i,
                to_state: i + 1,
                rate: self.a,
            },
        ]
    }

    /// Time change `t -> q t`: the same queue with unit service rate.
    ///
    /// Absorption times of the original queue map to `q * T` in the
    /// normalized one, and a rate `theta` of the normalized queue is
    /// `theta * q` in the original.
    pub fn normalize(&self) -> (ModelParams, TimeScale) {
        (
            ModelParams {
                a: self.a / self.q,
                q: 1.0,
            },
            TimeScale(self.q),
        )
    }
}

fn check_rate(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Parameter {
            field,
            value,
            reason: "must be finite",
        });
    }
    if value <= 0.0 {
        return Err(Error::Parameter {
            field,
            value,
            reason: "must be strictly positive",
        });
    }
    Ok(())
}

/// One entry `Q(from_state, to_state)` of the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorEntry {
    pub from_state: u64,
    pub to_state: u64,
    pub rate: f64,
}

/// Factor relating original and normalized time scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale(pub f64);

impl TimeScale {
    pub fn factor(&self) -> f64 {
        self.0
    }

    /// Absorption time of the normalized queue for an original time `t`.
    pub fn to_normalized_time(&self, t: f64) -> f64 {
        t * self.0
    }

    /// Rate in original units for a rate of the normalized queue.
    pub fn to_original_rate(&self, theta: f64) -> f64 {
        theta * self.0
    }

    pub fn to_normalized_rate(&self, theta: f64) -> f64 {
        theta / self.0
    }
}
