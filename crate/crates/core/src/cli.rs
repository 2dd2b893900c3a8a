//! Command-line front end. Every command returns an [`OutputRecord`] that
//! renders as JSON or CSV; `main` only prints it and picks the exit code.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::qsd;
use crate::sim::{self, SimConfig};
use crate::solver;
use crate::{laplace, special};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "QSD_MMINF_THREADS";
/// Largest identity residual accepted by `verify`.
pub const VERIFY_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_VERIFY_GRID: &str = "s=(-0.95,5]:30;x=[-10,10]:30";
pub const DEFAULT_AUTO_PROBES: usize = 11;

#[derive(Debug, Parser)]
#[command(
    name = "mminf-qsd",
    version,
    about = "Survival rate and quasi-stationary laws of the M/M/inf queue absorbed at 0"
)]
pub struct Cli {
    /// Output format written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for theta* with both characterizations and compare them.
    Theta(ThetaArgs),
    /// Quasi-stationary distribution from the recurrence and the generating function.
    Qsd(QsdArgs),
    /// E[exp(theta T)] over a grid of theta.
    Laplace(LaplaceArgs),
    /// Simulate trajectories, fit the survival rate and compare with nu*.
    Simulate(SimulateArgs),
    /// Check F(s,x) = 1 - s e^x bargamma(s,x) over an (s, x) grid.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Arrival rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    /// Service rate per customer.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub q: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.a, self.q)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ThetaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Root tolerance relative to q.
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
#[group(id = "which", required = true, multiple = false)]
pub struct QsdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Survival rate of the distribution; must not exceed theta*.
    #[arg(long, group = "which")]
    pub theta: Option<f64>,
    /// Use theta = theta* (the Yaglom limit).
    #[arg(long, group = "which")]
    pub minimal: bool,
    /// Number of entries reported.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Tail cutoff of the recurrence.
    #[arg(long, default_value_t = qsd::DEFAULT_EPS_TAIL)]
    pub eps_tail: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LaplaceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated values or `lo:hi:n`; default is 12 points on [0, 0.99 theta*].
    #[arg(long, allow_hyphen_values = true)]
    pub theta_grid: Option<String>,
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of trajectories.
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = sim::DEFAULT_SEED)]
    pub seed: u64,
    /// Censoring horizon; default 30/theta*.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Comma-separated probe times; default 11 points on [5/theta*, 30/theta*].
    #[arg(long)]
    pub probes: Option<String>,
    /// Histogram states 1..=k-max, the rest pooled.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = sim::DEFAULT_MAX_EVENTS)]
    pub max_events: u64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// `s=<interval>:<n>;x=<interval>:<n>`, intervals like `(-0.95,5]`, or a single value.
    #[arg(long, default_value = DEFAULT_VERIFY_GRID, allow_hyphen_values = true)]
    pub grid_spec: String,
    /// Tolerance for each side of the identity.
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub a: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

/// Everything a command writes to stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub params: Option<ParamsEcho>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub status: String,
    pub payload: Value,
    pub error: Option<ErrorPayload>,
    #[serde(skip)]
    table: Table,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

fn num(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl OutputRecord {
    fn new(command: &str, params: Option<&ModelParams>) -> Self {
        OutputRecord {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: params.map(|p| ParamsEcho { a: p.a(), q: p.q() }),
            tolerances: BTreeMap::new(),
            seed: None,
            status: "ok".into(),
            payload: Value::Null,
            error: None,
            table: Table::default(),
        }
    }

    fn failed(mut self, err: &Error) -> Self {
        self.status = "error".into();
        self.payload = Value::Null;
        self.error = Some(ErrorPayload {
            kind: err.kind().into(),
            message: err.to_string(),
            exit_code: err.exit_code(),
        });
        let mut table = Table::new(&["command", "status", "kind", "exit_code", "message"]);
        table.push([
            self.command.clone(),
            "error".into(),
            err.kind().into(),
            err.exit_code().to_string(),
            err.to_string(),
        ]);
        self.table = table;
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.exit_code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.table.headers)
            .expect("in-memory write");
        for row in &self.table.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Runs the parsed command line.
pub fn execute(cli: &Cli) -> OutputRecord {
    match &cli.command {
        Command::Theta(args) => cmd_theta(args),
        Command::Qsd(args) => cmd_qsd(args),
        Command::Laplace(args) => cmd_laplace(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn finish(
    record: OutputRecord,
    body: impl FnOnce(&mut OutputRecord) -> Result<()>,
) -> OutputRecord {
    let mut record = record;
    match body(&mut record) {
        Ok(()) => record,
        Err(e) => record.failed(&e),
    }
}

fn with_params(
    command: &str,
    model: &ModelArgs,
) -> std::result::Result<(OutputRecord, ModelParams), Box<OutputRecord>> {
    match model.params() {
        Ok(p) => Ok((OutputRecord::new(command, Some(&p)), p)),
        Err(e) => {
            let mut r = OutputRecord::new(command, None);
            r.params = Some(ParamsEcho {
                a: model.a,
                q: model.q,
            });
            Err(Box::new(r.failed(&e)))
        }
    }
}

pub fn cmd_theta(args: &ThetaArgs) -> OutputRecord {
    let (record, params) = match with_params("theta", &args.model) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    finish(record, |r| {
        r.tolerances.insert("tol".into(), args.tol);
        let report = solver::certify_equivalence(&params, args.tol)?;
        r.tolerances.insert("threshold".into(), report.threshold);
        r.payload = json!({
            "theta_series": report.series.theta,
            "theta_series_residual": report.series.residual,
            "theta_series_bracket_width": report.series.bracket_width,
            "theta_integral": report.integral.theta,
            "theta_integral_residual": report.integral.residual,
            "theta_integral_bracket_width": report.integral.bracket_width,
            "difference": report.difference,
            "threshold": report.threshold,
            "pass": report.pass,
        });
        let mut t = Table::new(&[
            "a",
            "q",
            "tol",
            "theta_series",
            "theta_series_bracket_width",
            "theta_integral",
            "theta_integral_bracket_width",
            "difference",
            "threshold",
            "pass",
        ]);
        t.push([
            num(params.a()),
            num(params.q()),
            num(args.tol),
            num(report.series.theta),
            num(report.series.bracket_width),
            num(report.integral.theta),
            num(report.integral.bracket_width),
            num(report.difference),
            num(report.threshold),
            report.pass.to_string(),
        ]);
        r.table = t;
        Ok(())
    })
}

pub fn cmd_qsd(args: &QsdArgs) -> OutputRecord {
    let (record, params) = match with_params("qsd", &args.model) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    finish(record, |r| {
        r.tolerances.insert("eps_tail".into(), args.eps_tail);
        if args.n == 0 {
            return Err(Error::Parameter {
                field: "n",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let recurrence = match args.theta {
            Some(theta) => qsd::qsd_recurrence_prefix(&params, theta, args.n, args.eps_tail)?,
            None => qsd::yaglom_reference(&params, args.eps_tail)?,
        };
        let theta = recurrence.theta;
        let n = args.n.min(qsd::MAX_GF_COEFFICIENTS);
        let gf = qsd::qsd_from_gf(&params, theta, n)?;
        let rec: Vec<f64> = (1..=n).map(|k| recurrence.prob(k)).collect();
        let diff: Vec<f64> = (1..=n)
            .map(|k| (recurrence.prob(k) - gf.prob(k)).abs())
            .collect();
        let max_diff = diff.iter().copied().fold(0.0, f64::max);
        r.payload = json!({
            "theta": theta,
            "minimal": args.minimal,
            "n": n,
            "recurrence": rec,
            "generating_function": gf.probs,
            "abs_discrepancy": diff,
            "max_discrepancy": max_diff,
            "recurrence_sum": recurrence.sum(),
            "recurrence_terms": recurrence.probs.len(),
            "tail_mass_estimate": recurrence.tail_mass_estimate,
        });
        let mut t = Table::new(&[
            "k",
            "theta",
            "recurrence",
            "generating_function",
            "abs_discrepancy",
        ]);
        for k in 1..=n {
            t.push([
                k.to_string(),
                num(theta),
                num(rec[k - 1]),
                num(gf.prob(k)),
                num(diff[k - 1]),
            ]);
        }
        r.table = t;
        Ok(())
    })
}

/// Parses `v1,v2,...` or `lo:hi:n` (n points, both ends included).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |value| Error::Parameter {
        field: "grid",
        value,
        reason: "expected comma-separated numbers or lo:hi:n",
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad(f64::NAN))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad(f64::NAN))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad(f64::NAN))?;
        if n == 0 || !(lo.is_finite() && hi.is_finite()) {
            return Err(bad(n as f64));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        return Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect());
    }
    if parts.len() != 1 {
        return Err(bad(f64::NAN));
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad(f64::NAN)))
        .collect()
}

pub fn cmd_laplace(args: &LaplaceArgs) -> OutputRecord {
    let (record, params) = match with_params("laplace", &args.model) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    finish(record, |r| {
        r.tolerances.insert("tol".into(), args.tol);
        r.tolerances
            .insert("singularity_guard".into(), laplace::SINGULARITY_GUARD);
        let theta_star = solver::solve_theta_star_series(&params, 1e-14)?.theta;
        let grid = match &args.theta_grid {
            Some(spec) => parse_grid(spec)?,
            None => parse_grid(&format!("0:{}:12", 0.99 * theta_star))?,
        };
        let mut points = Vec::with_capacity(grid.len());
        let mut t = Table::new(&["theta", "value", "abs_error_estimate", "status", "message"]);
        for &theta in &grid {
            match laplace::mgf_absorption_with(&params, theta_star, theta, args.tol) {
                Ok(m) => {
                    points.push(json!({
                        "theta": theta,
                        "value": m.value,
                        "abs_error_estimate": m.abs_error_estimate,
                        "status": "ok",
                    }));
                    t.push([
                        num(theta),
                        num(m.value),
                        num(m.abs_error_estimate),
                        "ok".into(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    points.push(json!({
                        "theta": theta,
                        "value": Value::Null,
                        "abs_error_estimate": Value::Null,
                        "status": e.kind(),
                        "message": e.to_string(),
                    }));
                    t.push([
                        num(theta),
                        String::new(),
                        String::new(),
                        e.kind().into(),
                        e.to_string(),
                    ]);
                }
            }
        }
        r.payload = json!({
            "theta_star": theta_star,
            "mean_absorption_time": laplace::mean_absorption_time(&params),
            "points": points,
        });
        r.table = t;
        Ok(())
    })
}

fn worker_cap() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(Error::Parameter {
            field: "QSD_MMINF_THREADS",
            value: raw.trim().parse().unwrap_or(f64::NAN),
            reason: "must be a positive integer",
        }),
    }
}

fn auto_probes(theta_hat: f64, t_max: f64) -> Vec<f64> {
    let (lo, hi) = (5.0 / theta_hat, 30.0 / theta_hat);
    let m = DEFAULT_AUTO_PROBES;
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .filter(|&t| t <= t_max)
        .collect()
}

/// Latest time with at least `min` trajectories still alive.
fn last_time_with_survivors(stats: &sim::TrajectoryStats, min: usize) -> Option<f64> {
    let n = stats.len();
    if min > n || min == 0 {
        return None;
    }
    let mut times: Vec<f64> = stats
        .absorption_times
        .iter()
        .zip(&stats.censored)
        .map(|(&t, &c)| if c { f64::INFINITY } else { t })
        .collect();
    times.sort_by(f64::total_cmp);
    let k = n - min;
    if k == 0 {
        return Some(0.0);
    }
    Some(times[k - 1].min(stats.t_max))
}

pub fn cmd_simulate(args: &SimulateArgs) -> OutputRecord {
    let (record, params) = match with_params("simulate", &args.model) {
        Ok(v) => v,
        Err(r) => return *r,
    };
    finish(record, |r| {
        r.seed = Some(args.seed);
        let theta_hat = solver::solve_theta_star_series(&params, solver::DEFAULT_TOL)?.theta;
        let t_max = args.t_max.unwrap_or(30.0 / theta_hat);
        let probes = match &args.probes {
            Some(spec) => parse_grid(spec)?,
            None => auto_probes(theta_hat, t_max),
        };
        let mut config = SimConfig::new(params, args.n)
            .seed(args.seed)
            .t_max(t_max)
            .probes(probes)
            .max_events(args.max_events);
        config.workers = worker_cap()?;
        r.tolerances.insert("t_max".into(), t_max);
        r.tolerances
            .insert("min_fit_survivors".into(), sim::MIN_FIT_SURVIVORS as f64);
        r.tolerances.insert(
            "min_histogram_survivors".into(),
            sim::MIN_HISTOGRAM_SURVIVORS as f64,
        );
        eprintln!(
            "simulating {} trajectories (seed {}, t_max {t_max})",
            args.n, args.seed
        );
        let stats = sim::run(&config)?;

        let t_lo = 5.0 / theta_hat;
        let t_hi = last_time_with_survivors(&stats, sim::MIN_FIT_SURVIVORS)
            .unwrap_or(0.0)
            .min(30.0 / theta_hat)
            .min(t_max);
        let fit = sim::fit_survival_rate(&stats, (t_lo, t_hi))?;

        let probe_counts: Vec<usize> = stats.states_at.iter().map(Vec::len).collect();
        let hist_probe = stats
            .probes
            .iter()
            .zip(&probe_counts)
            .rev()
            .find(|&(_, &c)| c >= sim::MIN_HISTOGRAM_SURVIVORS)
            .map(|(&t, _)| t)
            .ok_or_else(|| {
                Error::Statistics(format!(
                    "no probe has {} survivors",
                    sim::MIN_HISTOGRAM_SURVIVORS
                ))
            })?;
        let hist = sim::conditional_histogram(&stats, hist_probe, args.k_max)?;
        let nu = qsd::yaglom_reference(&params, qsd::DEFAULT_EPS_TAIL)?;
        let tv = hist.total_variation(&nu);
        let reference: Vec<f64> = (1..=args.k_max).map(|k| nu.prob(k)).collect();
        let reference_overflow = (1.0 - reference.iter().sum::<f64>()).max(0.0);

        let closed_mean = laplace::mean_absorption_time(&params);
        let mean = stats.mean_absorption_time().ok();

        let mut t = Table::new(&["section", "key", "index", "value", "uncertainty"]);
        let mut row = |section: &str, key: &str, index: Option<usize>, value: f64, unc: f64| {
            t.push([
                section.to_string(),
                key.to_string(),
                index.map_or(String::new(), |i| i.to_string()),
                num(value),
                num(unc),
            ]);
        };
        row("theta_star", "value", None, theta_hat, f64::NAN);
        row("fit", "rate", None, fit.rate, fit.stderr);
        row("fit", "window_start", None, fit.window.0, f64::NAN);
        row("fit", "window_end", None, fit.window.1, f64::NAN);
        row("histogram", "t", None, hist.t, f64::NAN);
        row(
            "histogram",
            "survivors",
            None,
            hist.survivors as f64,
            f64::NAN,
        );
        for (i, (&p, &q)) in hist.probs.iter().zip(&reference).enumerate() {
            row("histogram", "empirical", Some(i + 1), p, f64::NAN);
            row("histogram", "reference", Some(i + 1), q, f64::NAN);
        }
        row(
            "histogram",
            "empirical_overflow",
            None,
            hist.overflow,
            f64::NAN,
        );
        row(
            "histogram",
            "reference_overflow",
            None,
            reference_overflow,
            f64::NAN,
        );
        row("histogram", "tv_distance", None, tv, f64::NAN);
        row(
            "absorption_time",
            "closed_form_mean",
            None,
            closed_mean,
            f64::NAN,
        );
        if let Some(m) = mean {
            row("absorption_time", "sample_mean", None, m.mean, m.stderr);
        }
        row("trajectories", "n", None, stats.len() as f64, f64::NAN);
        row(
            "trajectories",
            "censored",
            None,
            stats.n_censored as f64,
            f64::NAN,
        );
        for (i, (&p, &c)) in stats.probes.iter().zip(&probe_counts).enumerate() {
            row("probes", "t", Some(i), p, f64::NAN);
            row("probes", "survivors", Some(i), c as f64, f64::NAN);
        }
        r.table = t;

        r.payload = json!({
            "n_trajectories": stats.len(),
            "n_censored": stats.n_censored,
            "t_max": t_max,
            "theta_star": theta_hat,
            "fit": {
                "rate": fit.rate,
                "stderr": fit.stderr,
                "window": [fit.window.0, fit.window.1],
                "n_points": fit.n_points,
                "relative_error": (fit.rate - theta_hat).abs() / theta_hat,
            },
            "histogram": {
                "t": hist.t,
                "survivors": hist.survivors,
                "empirical": hist.probs,
                "empirical_overflow": hist.overflow,
                "reference": reference,
                "reference_overflow": reference_overflow,
                "tv_distance": tv,
            },
            "absorption_time": {
                "sample_mean": mean.map(|m| m.mean),
                "stderr": mean.map(|m| m.stderr),
                "closed_form_mean": closed_mean,
            },
            "probes": stats.probes.iter().zip(&probe_counts)
                .map(|(&t, &c)| json!({"t": t, "survivors": c}))
                .collect::<Vec<_>>(),
        });
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    name: String,
    values: Vec<f64>,
}

fn parse_axis(spec: &str) -> Result<Axis> {
    let bad = || Error::Parameter {
        field: "grid_spec",
        value: f64::NAN,
        reason: "expected name=(lo,hi]:n or name=value",
    };
    let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
    let rest = rest.trim();
    let name = name.trim().to_string();
    if let Ok(v) = rest.parse::<f64>() {
        return Ok(Axis {
            name,
            values: vec![v],
        });
    }
    let (interval, count) = rest.rsplit_once(':').ok_or_else(bad)?;
    let n: usize = count.trim().parse().map_err(|_| bad())?;
    let interval = interval.trim();
    let open_lo = interval.starts_with('(');
    let open_hi = interval.ends_with(')');
    if !(open_lo || interval.starts_with('[')) || !(open_hi || interval.ends_with(']')) {
        return Err(bad());
    }
    let (lo, hi) = interval[1..interval.len() - 1]
        .split_once(',')
        .ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(bad());
    }
    let gaps = (n - 1) as f64 + f64::from(u8::from(open_lo)) + f64::from(u8::from(open_hi));
    if gaps == 0.0 {
        return Ok(Axis {
            name,
            values: vec![lo],
        });
    }
    let h = (hi - lo) / gaps;
    let start = if open_lo { lo + h } else { lo };
    Ok(Axis {
        name,
        values: (0..n).map(|i| start + h * i as f64).collect(),
    })
}

/// Parses the `verify` grid into `(s values, x values)`.
pub fn parse_grid_spec(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut s = None;
    let mut x = None;
    for part in spec.split(';').filter(|p| !p.trim().is_empty()) {
        let axis = parse_axis(part)?;
        match axis.name.as_str() {
            "s" => s = Some(axis.values),
            "x" => x = Some(axis.values),
            _ => {
                return Err(Error::Parameter {
                    field: "grid_spec",
                    value: f64::NAN,
                    reason: "axes must be named s and x",
                })
            }
        }
    }
    match (s, x) {
        (Some(s), Some(x)) => Ok((s, x)),
        _ => Err(Error::Parameter {
            field: "grid_spec",
            value: f64::NAN,
            reason: "both s and x must be given",
        }),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> OutputRecord {
    let record = OutputRecord::new("verify", None);
    finish(record, |r| {
        r.tolerances.insert("tol".into(), args.tol);
        r.tolerances.insert("threshold".into(), VERIFY_THRESHOLD);
        let (s_values, x_values) = parse_grid_spec(&args.grid_spec)?;
        let mut t = Table::new(&["s", "x", "residual", "abs_error_bound", "status", "message"]);
        let mut points = Vec::new();
        let mut failing = Vec::new();
        let mut max_residual: f64 = 0.0;
        let mut n_errors = 0usize;
        for &s in &s_values {
            for &x in &x_values {
                match special::identity_residual(s, x, args.tol) {
                    Ok(res) => {
                        max_residual = max_residual.max(res);
                        let status = if res <= VERIFY_THRESHOLD {
                            "ok"
                        } else {
                            "fail"
                        };
                        let p = json!({
                            "s": s, "x": x, "residual": res,
                            "abs_error_bound": 2.0 * args.tol, "status": status,
                        });
                        if status == "fail" {
                            failing.push(p.clone());
                        }
                        points.push(p);
                        t.push([
                            num(s),
                            num(x),
                            num(res),
                            num(2.0 * args.tol),
                            status.into(),
                            String::new(),
                        ]);
                    }
                    Err(e) => {
                        n_errors += 1;
                        points.push(json!({
                            "s": s, "x": x, "residual": Value::Null,
                            "abs_error_bound": Value::Null,
                            "status": e.kind(), "message": e.to_string(),
                        }));
                        t.push([
                            num(s),
                            num(x),
                            String::new(),
                            String::new(),
                            e.kind().into(),
                            e.to_string(),
                        ]);
                    }
                }
            }
        }
        r.payload = json!({
            "grid_spec": args.grid_spec,
            "n_points": points.len(),
            "n_errors": n_errors,
            "max_residual": max_residual,
            "threshold": VERIFY_THRESHOLD,
            "pass": failing.is_empty(),
            "failing": failing,
            "points": points,
        });
        r.table = t;
        Ok(())
    })
}

/// Parses `argv` and runs it, for callers that do not want a process.
pub fn run_args<I, T>(argv: I) -> std::result::Result<(OutputRecord, Format), clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok((execute(&cli), cli.format))
}

/// One-line summary for stderr.
pub fn summary(record: &OutputRecord) -> String {
    let mut s = String::new();
    match &record.error {
        Some(e) => {
            let _ = write!(s, "{} failed ({}): {}", record.command, e.kind, e.message);
        }
        None => {
            let _ = write!(s, "{} ok", record.command);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> OutputRecord {
        let argv = std::iter::once("mminf-qsd").chain(args.iter().copied());
        run_args(argv).unwrap().0
    }

    #[test]
    fn theta_unit_load() {
        let r = run(&["theta", "--a", "1", "--q", "1"]);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.payload["pass"], true);
        assert!(r.payload["difference"].as_f64().unwrap() <= 4e-12);
    }

    #[test]
    fn theta_bad_parameter() {
        let r = run(&["theta", "--a", "0", "--q", "1"]);
        assert_eq!(r.exit_code(), 2);
        assert_eq!(r.error.as_ref().unwrap().kind, "parameter");
    }

    #[test]
    fn qsd_invalid_theta() {
        let r = run(&["qsd", "--theta", "0.9", "--a", "1", "--q", "1"]);
        assert_eq!(r.exit_code(), 2);
        assert_eq!(r.error.as_ref().unwrap().kind, "invalid_theta");
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_grid("a:b").is_err());
        let (s, x) = parse_grid_spec(DEFAULT_VERIFY_GRID).unwrap();
        assert_eq!(s.len(), 30);
        assert_eq!(x.len(), 30);
        assert!(s[0] > -0.95);
        assert!((s[29] - 5.0).abs() < 1e-12);
        assert_eq!(x[0], -10.0);
        assert_eq!(x[29], 10.0);
        let (s, x) = parse_grid_spec("s=1;x=1").unwrap();
        assert_eq!((s, x), (vec![1.0], vec![1.0]));
        assert!(parse_grid_spec("s=1").is_err());
        assert!(parse_grid_spec("s=[2,1]:3;x=1").is_err());
    }

    #[test]
    fn verify_reports_poles_in_band() {
        let r = run(&["verify", "--grid-spec", "s=-2;x=[-1,1]:3"]);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.payload["n_errors"], 3);
        let r = run(&["verify", "--grid-spec", "s=1;x=1"]);
        assert!(r.payload["max_residual"].as_f64().unwrap() <= 2e-12);
    }

    #[test]
    fn csv_headers() {
        let r = run(&["laplace", "--theta-grid", "0,0.2,0.4502,0.9"]);
        let csv = r.to_csv();
        assert!(csv.starts_with("theta,value,abs_error_estimate,status,message\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("near_singularity"));
        assert!(csv.contains("domain"));
    }

    #[test]
    fn json_round_trip() {
        let r = run(&["laplace", "--theta-grid", "0:0.4:5"]);
        let back: OutputRecord = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.payload, r.payload);
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        assert_eq!(back.payload["points"][0]["value"], 1.0);
    }
}
