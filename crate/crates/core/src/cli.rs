//! Command-line front end.
//!
//! Exit codes: 0 on success (whatever the test decision), 2 for usage and
//! configuration errors, 3 for data errors.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::baselines::{gcm_test, robust_wald_test, williamson_test, BaselineResult};
use crate::data::{load_dataset, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::pcm::{pcm_multi, pcm_single_split, spline_pcm, PcmConfig, SplinePcmConfig, SplitDiagnostics, TestResult};
use crate::power::{gcm_asymptotic_power, pcm_asymptotic_power, LinearPowerParams};
use crate::regress::{fit, RegressorSpec};
use crate::rng::{label, RngStream};
use crate::sim::{run_experiment, write_report, MethodChoice, MethodName, ReportFormat, Scenario};
use crate::spline::TensorBasis;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pcm", version, about = "Projected covariance measure test for E(Y|X,Z) = E(Y|Z)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a test on a CSV file.
    Test(TestArgs),
    /// Estimate rejection rates on simulated data.
    Simulate(SimulateArgs),
    /// Asymptotic power in the univariate linear model.
    Power(PowerArgs),
    /// Time the main operations.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMethod {
    Pcm,
    PcmSingle,
    SplinePcm,
    Gcm,
    Williamson,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, clap::Args)]
pub struct TestArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Column roles, e.g. `x=x1;y=y;z=z1..z7`.
    #[arg(long)]
    pub schema: String,
    #[arg(long, value_enum, default_value = "pcm")]
    pub method: TestMethod,
    /// `Y` on `(X, Z)`.
    #[arg(long, default_value = "ols")]
    pub reg_g: String,
    /// Squared residuals on `(X, Z)`, or `none` for unit weights.
    #[arg(long, default_value = "ols")]
    pub reg_v: String,
    /// Projection on `Z`; also `X` on `Z` for the GCM.
    #[arg(long, default_value = "ols")]
    pub reg_mf: String,
    /// `Y` on `Z`.
    #[arg(long, default_value = "ols")]
    pub reg_m: String,
    /// Number of sample splits.
    #[arg(long = "B", default_value_t = 6)]
    pub splits: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub out: OutputFormat,
    /// Spline order for `spline-pcm`.
    #[arg(long, default_value_t = 2)]
    pub spline_order: usize,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Comma-separated scenario names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub scenario: Vec<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',', default_value = "pcm")]
    pub methods: Vec<String>,
    /// Sample sizes; defaults to each scenario's grid.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "PCM_THREADS")]
    pub threads: Option<usize>,
    /// Report path; `.json` selects JSON, anything else CSV. Stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the large-sample grids of the original study when no `--n-grid` is given.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PowerMethod {
    Pcm,
    Gcm,
}

#[derive(Debug, clap::Args)]
pub struct PowerArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long)]
    pub sigma_beta: f64,
    #[arg(long)]
    pub sigma_xi_sq: f64,
    #[arg(long)]
    pub sigma_eps_xi: f64,
    #[arg(long)]
    pub n1: usize,
    #[arg(long)]
    pub n2: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "pcm")]
    pub method: PowerMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Regress,
    Spline,
    Pcm,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
}

/// Stable JSON shape of `pcm test --out json`.
#[derive(Debug, Serialize)]
pub struct TestReport {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub per_split: Vec<SplitDiagnostics>,
    pub degenerate: bool,
}

impl From<TestResult> for TestReport {
    fn from(r: TestResult) -> Self {
        TestReport {
            method: r.method,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            per_split: r.per_split,
            degenerate: r.degenerate,
        }
    }
}

impl From<BaselineResult> for TestReport {
    fn from(r: BaselineResult) -> Self {
        TestReport {
            method: r.method,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            per_split: Vec::new(),
            degenerate: false,
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing results
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Test(a) => cmd_test(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Power(a) => cmd_power(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn parse_reg(flag: &str, text: &str) -> Result<RegressorSpec> {
    text.parse::<RegressorSpec>()
        .map_err(|e| Error::config(format!("--{flag}: {e}")))
}

fn cmd_test(a: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let reg_g = parse_reg("reg-g", &a.reg_g)?;
    let reg_v = match a.reg_v.trim() {
        "none" => None,
        s => Some(parse_reg("reg-v", s)?),
    };
    let reg_mf = parse_reg("reg-mf", &a.reg_mf)?;
    let reg_m = parse_reg("reg-m", &a.reg_m)?;
    let schema = ColumnSchema::parse(&a.schema).map_err(|e| Error::config(e.to_string()))?;
    let config = PcmConfig {
        reg_g: reg_g.clone(),
        reg_v,
        reg_mf: reg_mf.clone(),
        reg_m: reg_m.clone(),
        splits: a.splits,
        alpha: a.alpha,
        seed: RngStream::new(a.seed),
        ..PcmConfig::ols()
    };
    config.validate()?;
    let data = load_dataset(&a.data, &schema)?;
    let report: TestReport = match a.method {
        TestMethod::Pcm => pcm_multi(&data, &config)?.into(),
        TestMethod::PcmSingle => pcm_single_split(&data, &config)?.into(),
        TestMethod::SplinePcm => spline_pcm(
            &data,
            &SplinePcmConfig {
                order: a.spline_order,
                alpha: a.alpha,
                seed: RngStream::new(a.seed),
                ..SplinePcmConfig::default()
            },
        )?
        .into(),
        TestMethod::Gcm => gcm_test(&data, &reg_mf, &reg_m, a.alpha, RngStream::new(a.seed))?.into(),
        TestMethod::Williamson => williamson_test(&data, &reg_g, &reg_m, a.alpha, RngStream::new(a.seed))?.into(),
        TestMethod::Wald => robust_wald_test(&data, a.alpha)?.into(),
    };
    match a.out {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| io_err(e.into()))?;
            writeln!(out).map_err(io_err)
        }
        OutputFormat::Text => write_text(&report, out).map_err(io_err),
    }
}

fn write_text(r: &TestReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "method     {}", r.method)?;
    writeln!(out, "statistic  {}", r.statistic)?;
    writeln!(out, "p-value    {}", r.p_value)?;
    writeln!(out, "decision   {}", if r.reject { "reject" } else { "do not reject" })?;
    if r.degenerate {
        writeln!(out, "degenerate yes")?;
    }
    for (i, s) in r.per_split.iter().enumerate() {
        writeln!(
            out,
            "split {i}: T={} rho={} c={} n1={} n2={}{}",
            s.statistic,
            s.rho_hat,
            s.c_hat,
            s.n_statistic,
            s.n_projection,
            if s.degenerate { " degenerate" } else { "" }
        )?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let scenarios = a
        .scenario
        .iter()
        .map(|s| Scenario::lookup(s))
        .collect::<Result<Vec<_>>>()?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<MethodName>().map(MethodChoice::from))
        .collect::<Result<Vec<_>>>()?;
    if a.threads == Some(0) {
        return Err(Error::config("--threads must be at least 1"));
    }
    let scenarios: Vec<Scenario> = if a.full_scale {
        scenarios
            .into_iter()
            .map(|s| Scenario {
                default_n_grid: s.full_n_grid.clone(),
                ..s
            })
            .collect()
    } else {
        scenarios
    };
    let report = run_experiment(
        &scenarios,
        &methods,
        a.n_grid.as_deref(),
        a.reps,
        a.alpha,
        RngStream::new(a.seed),
        a.threads,
    )?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(err, "warning: {} / {} / n={}: {}", row.scenario, row.method, row.n, row.error.as_deref().unwrap());
    }
    match &a.out {
        Some(path) => {
            let format = match path.extension().and_then(|e| e.to_str()) {
                Some("json") => ReportFormat::Json,
                _ => ReportFormat::Csv,
            };
            crate::sim::emit_report(&report, format, path)
        }
        None => write_report(&report, ReportFormat::Csv, out).map_err(io_err),
    }
}

fn cmd_power(a: &PowerArgs, out: &mut dyn Write) -> Result<()> {
    let p = LinearPowerParams {
        beta: a.beta,
        sigma_beta: a.sigma_beta,
        sigma_xi_sq: a.sigma_xi_sq,
        sigma_eps_xi: a.sigma_eps_xi,
        n1: a.n1,
        n2: a.n2,
        alpha: a.alpha,
    };
    let psi = match a.method {
        PowerMethod::Pcm => pcm_asymptotic_power(&p)?,
        PowerMethod::Gcm => gcm_asymptotic_power(&p)?,
    };
    writeln!(out, "{psi:.10}").map_err(io_err)
}

fn bench_data(n: usize, dx: usize, dz: usize, seed: u64) -> Result<Dataset> {
    use rand::Rng;
    let mut rng = RngStream::new(seed).derive(label::DATA).rng();
    let z: Vec<f64> = (0..n * dz).map(|_| rng.random::<f64>()).collect();
    let x: Vec<f64> = (0..n * dx).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| (6.0 * z[i * dz]).sin() + x[i * dx] * x[i * dx] + rng.random::<f64>() - 0.5)
        .collect();
    Dataset::new(
        DMatrix::from_row_slice(n, dx, &x),
        DVector::from_vec(y),
        DMatrix::from_row_slice(n, dz, &z),
    )
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if a.size < 20 {
        return Err(Error::config("--size must be at least 20"));
    }
    let n = a.size;
    let mut rows: Vec<(&str, f64)> = Vec::new();
    let mut time = |name: &'static str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let start = Instant::now();
        f()?;
        rows.push((name, start.elapsed().as_secs_f64()));
        Ok(())
    };
    let stream = RngStream::new(0);
    match a.suite {
        Suite::Regress => {
            let data = bench_data(n, 1, 5, 1)?;
            let design = data.xz();
            for spec in ["ols", "lasso:cv", "sqrtlasso:auto", "spline:r=4,N=8", "forest:trees=50,leaf=5"] {
                let reg: RegressorSpec = spec.parse()?;
                let name: &'static str = match reg.name() {
                    "spline" => "spline additive r=4 N=8",
                    other => other,
                };
                time(name, &mut || fit(&reg, &design, data.y(), stream).map(|_| ()))?;
            }
        }
        Suite::Spline => {
            let data = bench_data(n, 1, 1, 2)?;
            let basis = TensorBasis::uniform(4, 8, 2)?;
            let points = data.xz();
            time("basis-eval tensor r=4 N=8 d=2", &mut || {
                for i in 0..n {
                    basis.evaluate(&[points[(i, 0)], points[(i, 1)]])?;
                }
                Ok(())
            })?;
            time("regress tensor r=4 N=8 d=2", &mut || {
                crate::spline::spline_regress(&points, data.y(), &basis).map(|_| ())
            })?;
            let additive: RegressorSpec = "spline:r=4,N=20,additive".parse()?;
            time("regress additive r=4 N=20 d=2", &mut || fit(&additive, &points, data.y(), stream).map(|_| ()))?;
        }
        Suite::Pcm => {
            let data = bench_data(n, 1, 1, 3)?;
            let ols = PcmConfig::ols();
            time("pcm-single ols", &mut || pcm_single_split(&data, &ols).map(|_| ()))?;
            time("pcm B=6 ols", &mut || pcm_multi(&data, &ols).map(|_| ()))?;
            let spline = PcmConfig::with_regressor("spline:r=4,N=8".parse()?);
            time("pcm B=6 spline", &mut || pcm_multi(&data, &spline).map(|_| ()))?;
            time("spline-pcm r=2", &mut || spline_pcm(&data, &SplinePcmConfig::default()).map(|_| ()))?;
        }
    }
    writeln!(out, "{:<32} {:>8} {:>12}", "operation", "size", "seconds").map_err(io_err)?;
    for (name, secs) in rows {
        writeln!(out, "{name:<32} {n:>8} {secs:>12.6}").map_err(io_err)?;
    }
    Ok(())
}
