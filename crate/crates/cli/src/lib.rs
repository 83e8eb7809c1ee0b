//! Commands behind the `edca` binary. Every command writes its table or
//! document to a writer so the output can be captured and compared.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use edca_core::metrics::{self, Metrics};
use edca_core::sim::{self, confidence, Confidence, SimOptions, TrafficModel};
use edca_core::{parse_scenario, ConfigError, Scenario, ScenarioDocument, SimError, SolveError, SolveOptions, SolvedModel};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Worker-count override for the thread pool.
pub const WORKERS_ENV: &str = "EDCA_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Solve(SolveError::MaxIterations(_)) => 2,
            _ => 1,
        }
    }
}

/// What a finished command reports besides its output.
#[derive(Debug, Default, PartialEq)]
pub struct Outcome {
    /// Some analytic solve stopped at the iteration cap.
    pub not_converged: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.not_converged {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format `{s}` (csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    OfferedLoadPerAc,
    StationsPerAc,
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "offered_load_per_ac" | "load" => Ok(Self::OfferedLoadPerAc),
            "stations_per_ac" | "stations" => Ok(Self::StationsPerAc),
            _ => Err(format!("unknown axis `{s}` (offered_load_per_ac or stations_per_ac)")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OfferedLoadPerAc => "offered_load_per_ac",
            Self::StationsPerAc => "stations_per_ac",
        })
    }
}

/// A number with an optional `k`, `M` or `G` suffix, e.g. `2.5M`.
pub fn parse_value(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last() {
        Some('k') => (&s[..s.len() - 1], 1e3),
        Some('M') => (&s[..s.len() - 1], 1e6),
        Some('G') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = digits.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v * scale)
}

/// Sweep axis and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>) -> Result<Self, CliError> {
        if values.is_empty() {
            return Err(CliError::Usage("--values: at least one value is required".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("--values: values must be strictly increasing".into()));
        }
        match axis {
            Axis::OfferedLoadPerAc if values.iter().any(|&v| v < 0.0) => {
                Err(CliError::Usage("--values: offered loads must be >= 0".into()))
            }
            Axis::StationsPerAc if values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) => {
                Err(CliError::Usage("--values: station counts must be whole numbers >= 1".into()))
            }
            _ => Ok(Self { axis, values }),
        }
    }

    fn apply(&self, scenario: &Scenario, v: f64) -> Scenario {
        match self.axis {
            Axis::OfferedLoadPerAc => scenario.with_offered_load(v),
            Axis::StationsPerAc => scenario.with_flows(v as u32),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text).map_err(|source| CliError::Config {
        path: path.to_owned(),
        source,
    })
}

/// Runs `f` on a pool sized by `EDCA_WORKERS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV}: expected a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pool.install(f))
}

fn names(scenario: &Scenario) -> Vec<String> {
    scenario.acs.iter().map(|a| a.name.clone()).collect()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        String::new()
    }
}

fn csv_line<W: Write>(w: &mut W, cols: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cols.join(","))
}

/// Analytic solve that keeps the best iterate when the cap is hit.
fn solve_model(scenario: &Scenario, opts: &SolveOptions) -> Result<SolvedModel, CliError> {
    match edca_core::solve(scenario, opts) {
        Ok(m) => Ok(m),
        Err(SolveError::MaxIterations(best)) => Ok(*best),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct AcSummary<'a> {
    name: &'a str,
    tau: f64,
    p_collision: f64,
    txop_exchanges: u32,
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    status: &'static str,
    iterations: usize,
    residual: f64,
    acs: Vec<AcSummary<'a>>,
    metrics: &'a Metrics,
}

fn status(model: &SolvedModel) -> &'static str {
    if model.converged {
        "converged"
    } else {
        "max_iterations"
    }
}

pub fn cmd_solve<W: Write>(doc: &ScenarioDocument, opts: &SolveOptions, format: Format, out: &mut W) -> Result<Outcome, CliError> {
    let scenario = &doc.scenario;
    let model = solve_model(scenario, opts)?;
    let m = metrics::compute(&model).map_err(SolveError::from)?;
    match format {
        Format::Json => {
            let acs = model
                .acs
                .iter()
                .zip(&scenario.acs)
                .filter_map(|(a, cfg)| {
                    a.as_ref().map(|a| AcSummary {
                        name: &cfg.name,
                        tau: a.tau,
                        p_collision: a.p_collision,
                        txop_exchanges: a.durations.txop_exchanges,
                    })
                })
                .collect();
            let doc = SolveDocument {
                status: status(&model),
                iterations: model.iterations,
                residual: model.residual,
                acs,
                metrics: &m,
            };
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(io::Error::other)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let names = names(scenario);
            let mut header = vec!["status".to_string(), "iterations".to_string()];
            header.extend(Metrics::csv_header(&names));
            csv_line(out, &header)?;
            let mut row = vec![status(&model).to_string(), model.iterations.to_string()];
            row.extend(m.csv_values(&names));
            csv_line(out, &row)?;
        }
    }
    Ok(Outcome {
        not_converged: !model.converged,
        ..Default::default()
    })
}

/// Simulator settings shared by `sim`, `compare` and simulated sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub seeds: u64,
    pub duration: f64,
}

impl SimSpec {
    pub fn new(seeds: u64, duration: f64) -> Result<Self, CliError> {
        if seeds == 0 {
            return Err(CliError::Usage("--seeds: at least one seed is required".into()));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(CliError::Usage("--duration: must be a positive number of seconds".into()));
        }
        Ok(Self { seeds, duration })
    }

    /// One simulator run per seed `0..seeds`, in seed order.
    fn run_all(&self, scenario: &Scenario, traffic: &[TrafficModel]) -> Result<Vec<Metrics>, CliError> {
        (0..self.seeds)
            .into_par_iter()
            .map(|seed| Ok(sim::run(scenario, traffic, seed, self.duration)?.metrics()))
            .collect()
    }
}

fn summarise(runs: &[Metrics]) -> Result<Option<Confidence>, CliError> {
    if runs.len() < 2 {
        return Ok(None);
    }
    Ok(Some(confidence(runs)?))
}

const ONE_SEED: &str = "a single seed gives no confidence interval; use --seeds 2 or more";

pub fn cmd_sweep<W: Write>(
    doc: &ScenarioDocument,
    spec: &SweepSpec,
    opts: &SolveOptions,
    sim_spec: Option<&SimSpec>,
    format: Format,
    out: &mut W,
) -> Result<Outcome, CliError> {
    struct Point {
        value: f64,
        status: String,
        iterations: Option<usize>,
        analytic: Option<Metrics>,
        simulated: Option<Confidence>,
        single: Option<Metrics>,
    }
    let points: Vec<Point> = spec
        .values
        .par_iter()
        .map(|&value| -> Result<Point, CliError> {
            let scenario = spec.apply(&doc.scenario, value);
            let (status, iterations, analytic) = match edca_core::solve(&scenario, opts) {
                Ok(m) => ("converged".to_string(), Some(m.iterations), Some(metrics::compute(&m))),
                Err(SolveError::MaxIterations(m)) => {
                    ("max_iterations".to_string(), Some(m.iterations), Some(metrics::compute(&m)))
                }
                Err(e) => (format!("error: {e}").replace(',', ";"), None, None),
            };
            let analytic = match analytic {
                Some(Ok(m)) => Some(m),
                Some(Err(e)) => return Ok(Point {
                    value,
                    status: format!("error: {e}").replace(',', ";"),
                    iterations,
                    analytic: None,
                    simulated: None,
                    single: None,
                }),
                None => None,
            };
            let (simulated, single) = match sim_spec {
                Some(s) => {
                    let mut runs = s.run_all(&scenario, &doc.traffic)?;
                    if runs.len() == 1 {
                        (None, runs.pop())
                    } else {
                        (summarise(&runs)?, None)
                    }
                }
                None => (None, None),
            };
            Ok(Point {
                value,
                status,
                iterations,
                analytic,
                simulated,
                single,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut outcome = Outcome {
        not_converged: points.iter().any(|p| p.status != "converged"),
        ..Default::default()
    };
    if sim_spec.is_some_and(|s| s.seeds == 1) {
        outcome.warnings.push(ONE_SEED.into());
    }
    let names = names(&doc.scenario);
    match format {
        Format::Csv => {
            let mut header = vec![spec.axis.to_string(), "source".into(), "status".into(), "iterations".into()];
            header.extend(Metrics::csv_header(&names));
            csv_line(out, &header)?;
            let blank = || vec![String::new(); Metrics::csv_header(&names).len()];
            for p in &points {
                let mut row = vec![num(p.value), "analytic".into(), p.status.clone()];
                row.push(p.iterations.map(|i| i.to_string()).unwrap_or_default());
                row.extend(p.analytic.as_ref().map_or_else(blank, |m| m.csv_values(&names)));
                csv_line(out, &row)?;
                let sim_rows: Vec<(&str, &Metrics)> = match (&p.simulated, &p.single) {
                    (Some(c), _) => vec![("sim_mean", &c.mean), ("sim_half_width", &c.half_width)],
                    (None, Some(m)) => vec![("sim_mean", m)],
                    (None, None) => vec![],
                };
                for (source, m) in sim_rows {
                    let mut row = vec![num(p.value), source.into(), "ok".into(), String::new()];
                    row.extend(m.csv_values(&names));
                    csv_line(out, &row)?;
                }
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                value: f64,
                status: &'a str,
                iterations: Option<usize>,
                analytic: Option<&'a Metrics>,
                sim_mean: Option<&'a Metrics>,
                sim_half_width: Option<&'a Metrics>,
            }
            let rows: Vec<Row> = points
                .iter()
                .map(|p| Row {
                    value: p.value,
                    status: &p.status,
                    iterations: p.iterations,
                    analytic: p.analytic.as_ref(),
                    sim_mean: p.simulated.as_ref().map(|c| &c.mean).or(p.single.as_ref()),
                    sim_half_width: p.simulated.as_ref().map(|c| &c.half_width),
                })
                .collect();
            #[derive(Serialize)]
            struct Doc<'a> {
                axis: String,
                points: Vec<Row<'a>>,
            }
            serde_json::to_writer_pretty(&mut *out, &Doc { axis: spec.axis.to_string(), points: rows })
                .map_err(io::Error::other)?;
            writeln!(out)?;
        }
    }
    Ok(outcome)
}

/// One metric of the side-by-side table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub analytic: f64,
    pub sim_mean: f64,
    pub sim_half_width: Option<f64>,
    /// `(sim − analytic) / analytic`; absent when the analytic value is 0.
    pub rel_error: Option<f64>,
}

fn flatten(m: &Metrics, names: &[String]) -> Vec<(String, f64)> {
    let mut out = vec![("p_idle".to_string(), m.p_idle), ("s_total".to_string(), m.throughput)];
    for n in names {
        if let Some(a) = m.acs.iter().find(|a| &a.name == n) {
            out.push((format!("s_{n}"), a.throughput));
            out.push((format!("p_s_{n}"), a.success_prob));
            out.push((format!("access_delay_{n}"), a.access_delay));
            out.push((format!("delay_{n}"), a.delay));
            out.push((format!("plr_{n}"), a.loss_ratio));
        }
    }
    out
}

pub fn comparison(analytic: &Metrics, runs: &[Metrics], names: &[String]) -> Result<Vec<ComparisonRow>, CliError> {
    let conf = summarise(runs)?;
    let mean = conf.as_ref().map_or(&runs[0], |c| &c.mean);
    let half = conf.as_ref().map(|c| flatten(&c.half_width, names));
    Ok(flatten(analytic, names)
        .into_iter()
        .zip(flatten(mean, names))
        .enumerate()
        .map(|(k, ((metric, a), (_, s)))| ComparisonRow {
            metric,
            analytic: a,
            sim_mean: s,
            sim_half_width: half.as_ref().map(|h| h[k].1),
            rel_error: if a != 0.0 { Some((s - a) / a) } else { None },
        })
        .collect())
}

pub fn cmd_compare<W: Write>(
    doc: &ScenarioDocument,
    opts: &SolveOptions,
    sim_spec: &SimSpec,
    format: Format,
    out: &mut W,
) -> Result<Outcome, CliError> {
    let scenario = &doc.scenario;
    let (model, runs) = rayon::join(|| solve_model(scenario, opts), || sim_spec.run_all(scenario, &doc.traffic));
    let model = model?;
    let analytic = metrics::compute(&model).map_err(SolveError::from)?;
    let rows = comparison(&analytic, &runs?, &names(scenario))?;
    let mut outcome = Outcome {
        not_converged: !model.converged,
        ..Default::default()
    };
    if sim_spec.seeds == 1 {
        outcome.warnings.push(ONE_SEED.into());
    }
    match format {
        Format::Csv => {
            csv_line(out, &["metric", "analytic", "sim_mean", "sim_half_width", "rel_error"].map(String::from))?;
            for r in &rows {
                let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
                csv_line(
                    out,
                    &[r.metric.clone(), num(r.analytic), num(r.sim_mean), opt(r.sim_half_width), opt(r.rel_error)],
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &rows).map_err(io::Error::other)?;
            writeln!(out)?;
        }
    }
    Ok(outcome)
}

pub fn cmd_sim<W: Write>(
    doc: &ScenarioDocument,
    sim_spec: &SimSpec,
    trace: Option<&Path>,
    format: Format,
    out: &mut W,
) -> Result<Outcome, CliError> {
    let scenario = &doc.scenario;
    if let Some(path) = trace {
        let mut w = io::BufWriter::new(fs::File::create(path)?);
        sim::run_with(scenario, &doc.traffic, &SimOptions::new(0, sim_spec.duration), Some(&mut w))?;
        w.flush()?;
    }
    let runs = sim_spec.run_all(scenario, &doc.traffic)?;
    let conf = summarise(&runs)?;
    let mut outcome = Outcome::default();
    if conf.is_none() {
        outcome.warnings.push(ONE_SEED.into());
    }
    let names = names(scenario);
    match format {
        Format::Csv => {
            let mut header = vec!["seed".to_string()];
            header.extend(Metrics::csv_header(&names));
            csv_line(out, &header)?;
            let mut rows: Vec<(String, &Metrics)> = runs.iter().enumerate().map(|(s, m)| (s.to_string(), m)).collect();
            if let Some(c) = &conf {
                rows.push(("mean".into(), &c.mean));
                rows.push(("half_width".into(), &c.half_width));
            }
            for (label, m) in rows {
                let mut row = vec![label];
                row.extend(m.csv_values(&names));
                csv_line(out, &row)?;
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                runs: &'a [Metrics],
                confidence: Option<&'a Confidence>,
            }
            serde_json::to_writer_pretty(&mut *out, &Doc { runs: &runs, confidence: conf.as_ref() })
                .map_err(io::Error::other)?;
            writeln!(out)?;
        }
    }
    Ok(outcome)
}
