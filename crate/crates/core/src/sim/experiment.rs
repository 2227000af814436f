use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::methods::{Method, MethodName, Outcome};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::rng::{label, RngStream};

/// A method either named, and then configured per scenario with the
/// scenario's default engines, or fully specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodChoice {
    Default(MethodName),
    Custom(Method),
}

impl MethodChoice {
    pub fn resolve(&self, scenario: &Scenario) -> Method {
        match self {
            MethodChoice::Default(name) => Method::for_scenario(*name, scenario),
            MethodChoice::Custom(m) => m.clone(),
        }
    }
}

impl From<MethodName> for MethodChoice {
    fn from(name: MethodName) -> Self {
        MethodChoice::Default(name)
    }
}

impl From<Method> for MethodChoice {
    fn from(m: Method) -> Self {
        MethodChoice::Custom(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub method: String,
    pub n: usize,
    pub reps: usize,
    /// `None` when the method failed on some repetition.
    pub rejection_rate: Option<f64>,
    pub mc_stderr: Option<f64>,
    /// Summed time spent in the test across repetitions.
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Stream for repetition `rep` of `scenario` at sample size `n`. The data
/// come from its `DATA` child; each method draws from
/// `METHOD`, then the method label.
pub fn repetition_stream(seed: RngStream, scenario: &Scenario, n: usize, rep: usize) -> RngStream {
    seed.derive_str(&scenario.name).derive(n as u64).derive(rep as u64)
}

fn method_stream(rep: RngStream, method: &Method) -> RngStream {
    rep.derive(label::METHOD).derive_str(&method.label)
}

/// Runs `method` on `reps` fresh datasets. Repetition `r` sees the same data
/// and the same method stream as in [`run_experiment`].
pub fn replicate(
    scenario: &Scenario,
    method: &Method,
    n: usize,
    reps: usize,
    alpha: f64,
    seed: RngStream,
) -> Vec<Result<Outcome>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let stream = repetition_stream(seed, scenario, n, r);
            let data = scenario.generate(n, stream.derive(label::DATA))?;
            method.run(&data, alpha, method_stream(stream, method))
        })
        .collect()
}

/// Rejection-rate table over `scenarios × methods × n_grid`.
///
/// `n_grid = None` uses each scenario's default grid. `threads = None` uses
/// the global rayon pool. Results do not depend on the thread count.
pub fn run_experiment(
    scenarios: &[Scenario],
    methods: &[MethodChoice],
    n_grid: Option<&[usize]>,
    reps: usize,
    alpha: f64,
    seed: RngStream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    if reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let work = || {
        let mut rows = Vec::new();
        for scenario in scenarios {
            let resolved: Vec<Method> = methods.iter().map(|m| m.resolve(scenario)).collect();
            let grid = n_grid.unwrap_or(&scenario.default_n_grid);
            for &n in grid {
                rows.extend(run_cell(scenario, &resolved, n, reps, alpha, seed));
            }
        }
        ExperimentReport { rows }
    };
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn run_cell(scenario: &Scenario, methods: &[Method], n: usize, reps: usize, alpha: f64, seed: RngStream) -> Vec<ReportRow> {
    let per_rep: Vec<Vec<(Result<Outcome>, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let stream = repetition_stream(seed, scenario, n, r);
            let data = scenario.generate(n, stream.derive(label::DATA));
            methods
                .iter()
                .map(|m| match &data {
                    Ok(d) => {
                        let start = Instant::now();
                        let out = m.run(d, alpha, method_stream(stream, m));
                        (out, start.elapsed().as_secs_f64())
                    }
                    Err(e) => (Err(Error::invalid(e.to_string())), 0.0),
                })
                .collect()
        })
        .collect();
    methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rejections = 0usize;
            let mut time = 0.0;
            let mut error = None;
            for rep in &per_rep {
                let (out, t) = &rep[k];
                time += t;
                match out {
                    Ok(o) => rejections += usize::from(o.reject),
                    Err(e) if error.is_none() => error = Some(e.to_string()),
                    Err(_) => {}
                }
            }
            let (rate, stderr) = if error.is_none() {
                let p = rejections as f64 / reps as f64;
                (Some(p), Some((p * (1.0 - p) / reps as f64).sqrt()))
            } else {
                (None, None)
            };
            ReportRow {
                scenario: scenario.name.clone(),
                method: m.label.clone(),
                n,
                reps,
                rejection_rate: rate,
                mc_stderr: stderr,
                wall_time_s: time,
                error,
            }
        })
        .collect()
}

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "method",
    "n",
    "reps",
    "rejection_rate",
    "mc_stderr",
    "wall_time_s",
    "error",
];

/// Writes the report as CSV or pretty JSON.
pub fn write_report<W: Write>(report: &ExperimentReport, format: ReportFormat, w: W) -> std::io::Result<()> {
    match format {
        ReportFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)
        }
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(CSV_HEADER)?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &report.rows {
                out.write_record([
                    r.scenario.clone(),
                    r.method.clone(),
                    r.n.to_string(),
                    r.reps.to_string(),
                    opt(r.rejection_rate),
                    opt(r.mc_stderr),
                    format!("{:.6}", r.wall_time_s),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            out.flush()
        }
    }
}

/// Writes the report to `path`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_report(report, format, std::io::BufWriter::new(file)).map_err(io)
}

/// Reads a JSON report written by [`emit_report`].
pub fn read_json_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        row: e.line(),
        msg: e.to_string(),
    })
}
