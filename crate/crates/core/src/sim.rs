//! Exact event-by-event simulation of the absorbed queue.
//!
//! Every trajectory draws from its own ChaCha8 stream keyed by
//! `(seed, trajectory index)`, so results do not depend on how trajectories
//! are spread across worker threads. Chunks are merged in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::qsd::QsdVector;
use crate::solver::{Method, SurvivalRate};

pub const DEFAULT_T_MAX: f64 = 200.0;
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;
pub const DEFAULT_SEED: u64 = 42;
/// Survivors required at the end of a fit window.
pub const MIN_FIT_SURVIVORS: usize = 50;
/// Survivors required for a conditional histogram.
pub const MIN_HISTOGRAM_SURVIVORS: usize = 200;
/// Evaluation points used by [`fit_survival_rate`].
pub const FIT_POINTS: usize = 25;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub initial_state: u32,
    pub n_trajectories: u64,
    pub t_max: f64,
    pub max_events: u64,
    pub seed: u64,
    /// Times at which the state of every surviving trajectory is recorded.
    pub probes: Vec<f64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(params: ModelParams, n_trajectories: u64) -> Self {
        SimConfig {
            params,
            initial_state: 1,
            n_trajectories,
            t_max: DEFAULT_T_MAX,
            max_events: DEFAULT_MAX_EVENTS,
            seed: DEFAULT_SEED,
            probes: Vec::new(),
            workers: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn initial_state(mut self, state: u32) -> Self {
        self.initial_state = state;
        self
    }

    pub fn probes(mut self, probes: Vec<f64>) -> Self {
        self.probes = probes;
        self
    }

    pub fn max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, value, reason| {
            Err(Error::Parameter {
                field,
                value,
                reason,
            })
        };
        if self.n_trajectories == 0 {
            return bad("n_trajectories", 0.0, "must be at least 1");
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max", self.t_max, "must be finite and strictly positive");
        }
        if self.max_events == 0 {
            return bad("max_events", 0.0, "must be at least 1");
        }
        if self.workers == Some(0) {
            return bad("workers", 0.0, "must be at least 1");
        }
        for (i, &p) in self.probes.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0 && p <= self.t_max) {
                return bad("probes", p, "probe times must lie in [0, t_max]");
            }
            if i > 0 && p <= self.probes[i - 1] {
                return bad("probes", p, "probe times must be strictly increasing");
            }
        }
        Ok(())
    }
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub t_max: f64,
    /// Absorption time per trajectory; censored entries hold `t_max`.
    pub absorption_times: Vec<f64>,
    pub censored: Vec<bool>,
    pub n_censored: usize,
    pub probes: Vec<f64>,
    /// For each probe, the states of the trajectories still alive then,
    /// in trajectory order.
    pub states_at: Vec<Vec<u32>>,
}

impl TrajectoryStats {
    /// Stats without probe snapshots, e.g. from externally produced times.
    /// Times above `t_max` are censored.
    pub fn from_absorption_times(times: Vec<f64>, t_max: f64) -> Self {
        let censored: Vec<bool> = times.iter().map(|&t| t >= t_max).collect();
        let n_censored = censored.iter().filter(|&&c| c).count();
        let absorption_times = times.into_iter().map(|t| t.min(t_max)).collect();
        TrajectoryStats {
            t_max,
            absorption_times,
            censored,
            n_censored,
            probes: Vec::new(),
            states_at: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.absorption_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorption_times.is_empty()
    }

    /// Trajectories alive at time `t <= t_max`; censored ones count as alive.
    pub fn survivors_at(&self, t: f64) -> usize {
        self.absorption_times
            .iter()
            .zip(&self.censored)
            .filter(|&(&time, &cens)| cens || time > t)
            .count()
    }

    fn uncensored(&self) -> Result<()> {
        if self.n_censored > 0 {
            return Err(Error::Statistics(format!(
                "{} trajectories were censored at t_max = {}",
                self.n_censored, self.t_max
            )));
        }
        if self.len() < 2 {
            return Err(Error::Statistics("need at least two trajectories".into()));
        }
        Ok(())
    }

    /// Sample mean of the absorption time and its standard error.
    pub fn mean_absorption_time(&self) -> Result<SampleMean> {
        self.uncensored()?;
        Ok(SampleMean::of(self.absorption_times.iter().copied()))
    }

    /// Sample mean of `e^{θT}` and its standard error.
    pub fn mgf_estimate(&self, theta: f64) -> Result<SampleMean> {
        self.uncensored()?;
        Ok(SampleMean::of(
            self.absorption_times.iter().map(|&t| (theta * t).exp()),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMean {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl SampleMean {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        let nf = n as f64;
        let mean = values.clone().sum::<f64>() / nf;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        SampleMean {
            mean,
            stderr: (var / nf).sqrt(),
            n,
        }
    }
}

struct Chunk {
    times: Vec<f64>,
    censored: Vec<bool>,
    states_at: Vec<Vec<u32>>,
}

fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn simulate_chunk(config: &SimConfig, start: u64, end: u64) -> Result<Chunk> {
    let (a, q) = (config.params.a(), config.params.q());
    let probes = &config.probes;
    let len = (end - start) as usize;
    let mut chunk = Chunk {
        times: Vec::with_capacity(len),
        censored: Vec::with_capacity(len),
        states_at: vec![Vec::new(); probes.len()],
    };
    for index in start..end {
        let mut rng = trajectory_rng(config.seed, index);
        let mut state = config.initial_state;
        let mut t = 0.0;
        let mut events = 0u64;
        let mut next_probe = 0;
        let mut censored = false;
        while state > 0 {
            let rate = a + f64::from(state) * q;
            let hold: f64 = rng.sample(Exp1);
            let t_next = t + hold / rate;
            while next_probe < probes.len() && probes[next_probe] < t_next {
                chunk.states_at[next_probe].push(state);
                next_probe += 1;
            }
            if t_next > config.t_max {
                t = config.t_max;
                censored = true;
                break;
            }
            t = t_next;
            events += 1;
            if events > config.max_events {
                return Err(Error::Runaway {
                    trajectory: index,
                    max_events: config.max_events,
                });
            }
            if rng.random::<f64>() * rate < a {
                state += 1;
            } else {
                state -= 1;
            }
        }
        chunk.times.push(t);
        chunk.censored.push(censored);
    }
    Ok(chunk)
}

/// Simulates `config.n_trajectories` independent paths.
pub fn run(config: &SimConfig) -> Result<TrajectoryStats> {
    config.validate()?;
    let n = config.n_trajectories;
    let n_chunks = n.div_ceil(CHUNK);
    let work = || -> Result<Vec<Chunk>> {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| simulate_chunk(config, c * CHUNK, ((c + 1) * CHUNK).min(n)))
            .collect()
    };
    let chunks = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Statistics(format!("cannot start worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut stats = TrajectoryStats {
        t_max: config.t_max,
        absorption_times: Vec::with_capacity(n as usize),
        censored: Vec::with_capacity(n as usize),
        n_censored: 0,
        probes: config.probes.clone(),
        states_at: vec![Vec::new(); config.probes.len()],
    };
    for chunk in chunks {
        stats.absorption_times.extend(chunk.times);
        stats.censored.extend(chunk.censored);
        for (all, part) in stats.states_at.iter_mut().zip(chunk.states_at) {
            all.extend(part);
        }
    }
    stats.n_censored = stats.censored.iter().filter(|&&c| c).count();
    Ok(stats)
}

/// Exponential rate fitted to the tail of the empirical survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalFit {
    pub rate: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl SurvivalFit {
    pub fn as_survival_rate(&self) -> SurvivalRate {
        SurvivalRate {
            theta: self.rate,
            method: Method::SimulationFit,
            residual: self.stderr,
            bracket_width: 0.0,
        }
    }
}

/// Least-squares slope of `-ln S(t)` over `FIT_POINTS` equally spaced times
/// in the window, each point weighted by its survivor count (the inverse
/// of the approximate variance of `ln S`).
pub fn fit_survival_rate(stats: &TrajectoryStats, window: (f64, f64)) -> Result<SurvivalFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo.is_finite() && t_hi.is_finite() && t_lo >= 0.0 && t_lo < t_hi) {
        return Err(Error::Statistics(format!(
            "empty fit window ({t_lo}, {t_hi})"
        )));
    }
    if t_hi > stats.t_max {
        return Err(Error::Statistics(format!(
            "fit window ends at {t_hi}, after t_max = {}",
            stats.t_max
        )));
    }
    let mut sorted: Vec<f64> = stats
        .absorption_times
        .iter()
        .zip(&stats.censored)
        .filter(|&(_, &c)| !c)
        .map(|(&t, _)| t)
        .collect();
    sorted.sort_by(f64::total_cmp);
    let total = stats.len();
    let survivors = |t: f64| total - sorted.partition_point(|&x| x <= t);

    if survivors(t_hi) < MIN_FIT_SURVIVORS {
        return Err(Error::Statistics(format!(
            "{} survivors at t = {t_hi}, need at least {MIN_FIT_SURVIVORS}",
            survivors(t_hi)
        )));
    }

    let m = FIT_POINTS;
    let points: Vec<(f64, f64, f64)> = (0..m)
        .map(|i| {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (m - 1) as f64;
            let s = survivors(t) as f64;
            (t, -(s / total as f64).ln(), s)
        })
        .collect();
    let w_sum: f64 = points.iter().map(|p| p.2).sum();
    let t_bar = points.iter().map(|p| p.2 * p.0).sum::<f64>() / w_sum;
    let y_bar = points.iter().map(|p| p.2 * p.1).sum::<f64>() / w_sum;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - t_bar).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| p.2 * (p.0 - t_bar) * (p.1 - y_bar))
        .sum();
    let rate = sxy / sxx;
    let intercept = y_bar - rate * t_bar;
    let rss: f64 = points
        .iter()
        .map(|p| p.2 * (p.1 - intercept - rate * p.0).powi(2))
        .sum();
    // weights are absolute inverse variances; rescale by the residual
    // variance only when it is larger than expected
    let sigma2 = (rss / (m - 2) as f64).max(1.0);
    Ok(SurvivalFit {
        rate,
        stderr: (sigma2 / sxx).sqrt(),
        window,
        n_points: m,
    })
}

/// Empirical law of `X_t` given `t < T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalHistogram {
    pub t: f64,
    pub survivors: usize,
    /// `probs[k - 1]` is the fraction of survivors in state `k`.
    pub probs: Vec<f64>,
    /// Fraction of survivors above `k_max`.
    pub overflow: f64,
}

impl ConditionalHistogram {
    /// Total-variation distance to a distribution on `{1, 2, ...}`; mass of
    /// `qsd` beyond `k_max` is compared with the overflow bin.
    pub fn total_variation(&self, qsd: &QsdVector) -> f64 {
        let k_max = self.probs.len();
        let mut l1: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - qsd.prob(i + 1)).abs())
            .sum();
        let inside: f64 = (1..=k_max).map(|k| qsd.prob(k)).sum();
        l1 += (self.overflow - (1.0 - inside).max(0.0)).abs();
        0.5 * l1
    }
}

pub fn conditional_histogram(
    stats: &TrajectoryStats,
    t: f64,
    k_max: usize,
) -> Result<ConditionalHistogram> {
    if k_max == 0 {
        return Err(Error::Statistics("k_max must be at least 1".into()));
    }
    let idx = stats
        .probes
        .iter()
        .position(|&p| p == t)
        .ok_or_else(|| Error::Statistics(format!("t = {t} was not a probe time")))?;
    let states = &stats.states_at[idx];
    if states.len() < MIN_HISTOGRAM_SURVIVORS {
        return Err(Error::Statistics(format!(
            "{} survivors at t = {t}, need at least {MIN_HISTOGRAM_SURVIVORS}",
            states.len()
        )));
    }
    let mut counts = vec![0usize; k_max];
    let mut over = 0usize;
    for &s in states {
        match (s as usize).checked_sub(1) {
            Some(k) if k < k_max => counts[k] += 1,
            _ => over += 1,
        }
    }
    let n = states.len() as f64;
    Ok(ConditionalHistogram {
        t,
        survivors: states.len(),
        probs: counts.into_iter().map(|c| c as f64 / n).collect(),
        overflow: over as f64 / n,
    })
}
