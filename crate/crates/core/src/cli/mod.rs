//! Command-line front end: argument parsing, dispatch and exit codes.
//!
//! Exit status is 0 on success, 2 for bad input and 3 when a computation
//! fails numerically; failures also print a JSON error document on stderr.

mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use io::{num, parse_samples, read_samples, Format, Output};

use crate::density::{DistributionHandle, Family, FitOptions, Model};
use crate::dominance::{run_dominance_test, DominanceConfig, Statistic};
use crate::error::{Error, Result};
use crate::hellinger::{estimate_hellinger, HellingerEstimator};
use crate::kde::Bandwidth;
use crate::logconcave::{lc_fit, lc_smooth, DEFAULT_TOL};
use crate::simulate::{
    crossval_risk, hellinger_experiment, power_curves, power_near_data, DominanceCase, HellingerCase, HellingerSpec,
    Method, NearDataSpec, PowerCurve, ScenarioSpec, PAPER_REPLICATES,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Seed used by every randomized command unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 20_160_901;
pub const THREADS_ENV: &str = "SHAPESTAT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "shapestat", version, about = "Shape-constrained density estimation, dominance tests and Hellinger inference")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a density and tabulate it on a grid.
    Density(DensityArgs),
    /// Test whether the first sample stochastically dominates the second.
    Dominance(DominanceArgs),
    /// Estimate the squared Hellinger distance between two samples.
    Hellinger(HellingerArgs),
    /// Monte Carlo studies.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Cross-validated risks of the density estimators.
    Crossval(CrossvalArgs),
    /// Power at alternatives built from two observed samples.
    PowerNearData(NearDataArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Rejection rates over a grid of alternatives.
    Power(PowerArgs),
    /// Bias, MSE and coverage of the Hellinger estimators.
    Hellinger(SimHellingerArgs),
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_stat(s: &str) -> std::result::Result<Statistic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<HellingerEstimator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bandwidth(s: &str) -> std::result::Result<Bandwidth, String> {
    match s {
        "lscv" => Ok(Bandwidth::Lscv),
        "plugin" => Ok(Bandwidth::PlugIn),
        _ => match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(format!("bandwidth must be lscv, plugin or a positive number, got '{s}'")),
        },
    }
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let bad = || format!("interval must be LO,HI with finite LO < HI, got '{s}'");
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    match (lo.trim().parse::<f64>(), hi.trim().parse::<f64>()) {
        (Ok(lo), Ok(hi)) if lo.is_finite() && hi.is_finite() && lo < hi => Ok((lo, hi)),
        _ => Err(bad()),
    }
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    /// Number of evenly spaced grid points; breakpoints and knots are added.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Birgé tolerance (default 1/n).
    #[arg(long)]
    pub eta: Option<f64>,
    /// lscv, plugin, or a fixed positive bandwidth.
    #[arg(long, default_value = "lscv", value_parser = parse_bandwidth)]
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Args)]
pub struct DominanceArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_parser = parse_stat)]
    pub stat: Statistic,
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Use the conservative critical value (tsep only).
    #[arg(long)]
    pub conservative: bool,
    /// Replace the trimmed pooled-quantile interval by `LO,HI`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_interval)]
    pub interval: Option<(f64, f64)>,
    /// Birgé tolerance (default 1/N).
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HellingerArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// unimodal, logconcave, logconcave-smoothed, kde-naive or kde-bias-corrected.
    #[arg(long, value_parser = parse_estimator)]
    pub family: HellingerEstimator,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, value_parser = |s: &str| s.parse::<DominanceCase>().map_err(|e| e.to_string()))]
    pub case: DominanceCase,
    /// One or more statistics, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_stat, required = true)]
    pub stat: Vec<Statistic>,
    /// One or more families, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_family, required = true)]
    pub family: Vec<Family>,
    #[arg(long)]
    pub conservative: bool,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = PAPER_REPLICATES)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Comma-separated γ values (default 0, 0.1, …, 1).
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimHellingerArgs {
    #[arg(long, value_parser = |s: &str| s.parse::<HellingerCase>().map_err(|e| e.to_string()))]
    pub case: HellingerCase,
    /// Comma-separated common sample sizes (default 50, 100, …, 500).
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = PAPER_REPLICATES)]
    pub reps: usize,
    /// Comma-separated estimators (default all).
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<HellingerEstimator>>,
    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Reference samples whose smoothed log-concave fits define case c.
    #[arg(long, requires = "ref_y")]
    pub ref_x: Option<PathBuf>,
    #[arg(long, requires = "ref_x")]
    pub ref_y: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub x: PathBuf,
    /// Comma-separated families (default unimodal, logconcave, logconcave-smoothed, kde).
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    pub methods: Option<Vec<Family>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value = "lscv", value_parser = parse_bandwidth)]
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Args)]
pub struct NearDataArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_stat, default_value = "min-t,tsep")]
    pub stat: Vec<Statistic>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "empirical,logconcave,logconcave-smoothed")]
    pub family: Vec<Family>,
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = PAPER_REPLICATES)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Draws from each mixture used to approximate its projection.
    #[arg(long, default_value_t = 1000)]
    pub projection_size: usize,
}

fn document(kind: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!(kind));
    m
}

fn extend(doc: &mut Map<String, Value>, v: impl Serialize) {
    if let Value::Object(o) = serde_json::to_value(v).expect("serializable") {
        doc.extend(o);
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

fn density(a: &DensityArgs) -> Result<Output> {
    if a.grid < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    let x = read_samples(&a.x)?;
    let opts = FitOptions {
        eta: a.eta,
        lc_tol: DEFAULT_TOL,
        bandwidth: a.bandwidth,
    };
    let h = DistributionHandle::fit(&x, a.family, &opts)?;
    let (lo, hi) = h.range();
    let mut xs = linspace(lo, hi, a.grid);
    xs.extend(h.breakpoints());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let row = |x: f64, pdf: Value| json!({"x": x, "pdf": pdf, "cdf": h.cdf(x)});
    let mut grid = Vec::with_capacity(xs.len());
    for &v in &xs {
        match h.model() {
            Model::Empirical(_) => grid.push(row(v, Value::Null)),
            Model::Step(f) => {
                // left and right limits at breakpoints
                let (l, r) = (f.pdf(v), f.pdf_right(v));
                grid.push(row(v, json!(l)));
                if f.breakpoints().binary_search_by(|b| b.total_cmp(&v)).is_ok() && l != r {
                    grid.push(row(v, json!(r)));
                }
            }
            _ => grid.push(row(v, json!(h.pdf(v)))),
        }
    }
    let params = match h.model() {
        Model::Empirical(e) => json!({"n": x.len(), "n_distinct": e.support().len()}),
        Model::Step(f) => json!({
            "eta": a.eta.unwrap_or(1.0 / x.len() as f64),
            "mode": f.mode(),
            "breakpoints": f.breakpoints(),
            "heights": f.heights(),
        }),
        Model::LogConcave(f) => json!({
            "knots": f.active_knots(),
            "log_density": f.active_knots().iter().map(|&k| f.log_pdf(k)).collect::<Vec<_>>(),
            "optimality_gap": f.optimality_gap(),
            "iterations": f.iterations(),
        }),
        Model::Smoothed(f) => json!({
            "knots": f.base().active_knots(),
            "log_density": f.base().active_knots().iter().map(|&k| f.base().log_pdf(k)).collect::<Vec<_>>(),
            "gamma_sq": f.gamma_sq(),
        }),
        Model::Kde(f) => json!({
            "bandwidth": f.bandwidth(),
            "selector": match a.bandwidth {
                Bandwidth::Lscv => "lscv",
                Bandwidth::PlugIn => "plugin",
                Bandwidth::Fixed(_) => "fixed",
            },
        }),
    };
    let mut doc = document("density");
    doc.insert("family".into(), json!(a.family));
    doc.insert("n".into(), json!(x.len()));
    doc.insert("grid".into(), Value::Array(grid.clone()));
    doc.insert("params".into(), params);
    Ok(Output::with_rows(doc, grid))
}

fn dominance(a: &DominanceArgs) -> Result<Output> {
    let x = read_samples(&a.x)?;
    let y = read_samples(&a.y)?;
    let mut cfg = DominanceConfig::new(a.family, a.stat);
    cfg.p = a.p;
    cfg.alpha = a.alpha;
    cfg.conservative = a.conservative;
    cfg.interval = a.interval;
    cfg.fit.eta = a.eta;
    let r = run_dominance_test(&x, &y, &cfg)?;
    let mut doc = document("dominance");
    doc.insert("statistic".into(), json!(r.statistic));
    doc.insert("value".into(), num(r.value));
    doc.insert("critical_value".into(), num(r.critical_value));
    doc.insert("p_value".into(), num(r.p_value));
    doc.insert("reject".into(), json!(r.reject));
    doc.insert("p".into(), json!(r.p));
    doc.insert("interval".into(), json!([num(r.interval.lower), num(r.interval.upper)]));
    doc.insert("interval_degenerate".into(), json!(r.interval.degenerate));
    doc.insert("family".into(), json!(r.family));
    doc.insert("conservative".into(), json!(r.conservative));
    doc.insert("c_mn".into(), json!(r.c_mn));
    doc.insert("lambda_hat".into(), json!(r.lambda_hat));
    doc.insert("asymptotics_unknown".into(), json!(r.asymptotics_unknown));
    doc.insert("m".into(), json!(x.len()));
    doc.insert("n".into(), json!(y.len()));
    Ok(Output::new(doc))
}

fn hellinger(a: &HellingerArgs) -> Result<Output> {
    let x = read_samples(&a.x)?;
    let y = read_samples(&a.y)?;
    let r = estimate_hellinger(&x, &y, a.family, a.ci_level)?;
    let mut doc = document("hellinger");
    extend(&mut doc, &r);
    Ok(Output::new(doc))
}

fn curve_rows(curves: &[PowerCurve]) -> Vec<Value> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                json!({
                    "case": c.case, "statistic": c.statistic, "family": c.family,
                    "conservative": c.conservative, "m": c.m, "n": c.n,
                    "gamma": p.gamma, "estimate": num(p.estimate), "se": num(p.se),
                    "reps": p.reps, "failures": p.failures,
                })
            })
        })
        .collect()
}

fn methods(stats: &[Statistic], families: &[Family], conservative: bool) -> Vec<Method> {
    families
        .iter()
        .flat_map(|&f| {
            stats.iter().map(move |&s| Method {
                statistic: s,
                family: f,
                conservative,
            })
        })
        .collect()
}

fn sim_power(a: &PowerArgs) -> Result<Output> {
    let mut spec = ScenarioSpec::new(a.case, a.reps, a.seed);
    spec.m = a.m;
    spec.n = a.n;
    spec.p = a.p;
    spec.alpha = a.alpha;
    if let Some(g) = &a.gammas {
        spec.gammas = g.clone();
    }
    let curves = power_curves(&spec, &methods(&a.stat, &a.family, a.conservative))?;
    let mut doc = document("power");
    doc.insert("spec".into(), serde_json::to_value(&spec).expect("serializable"));
    doc.insert("curves".into(), serde_json::to_value(&curves).expect("serializable"));
    Ok(Output::with_rows(doc, curve_rows(&curves)))
}

fn sim_hellinger(a: &SimHellingerArgs) -> Result<Output> {
    let mut spec = HellingerSpec::new(a.case, a.reps, a.seed);
    if let Some(g) = &a.n_grid {
        spec.n_grid = g.clone();
    }
    if let Some(e) = &a.estimators {
        spec.estimators = e.clone();
    }
    spec.ci_level = a.ci_level;
    let reference = match (&a.ref_x, &a.ref_y) {
        (Some(px), Some(py)) => {
            let fit = |p: &PathBuf| -> Result<_> {
                let s = read_samples(p)?;
                lc_smooth(&lc_fit(&s, DEFAULT_TOL)?, &s).map_err(|e| e.context(format!("fitting {}", p.display())))
            };
            Some((fit(px)?, fit(py)?))
        }
        _ => None,
    };
    let curve = hellinger_experiment(&spec, reference.as_ref().map(|(f, g)| (f, g)))?;
    let mut doc = document("hellinger-simulation");
    doc.insert("spec".into(), serde_json::to_value(&spec).expect("serializable"));
    extend(&mut doc, &curve);
    let rows = curve
        .points
        .iter()
        .map(|p| {
            let mut v = serde_json::to_value(p).expect("serializable");
            v["case"] = json!(curve.case);
            v["truth"] = json!(curve.truth);
            v
        })
        .collect();
    Ok(Output::with_rows(doc, rows))
}

fn crossval(a: &CrossvalArgs) -> Result<Output> {
    let x = read_samples(&a.x)?;
    let fams = a
        .methods
        .clone()
        .unwrap_or_else(|| vec![Family::Unimodal, Family::Logconcave, Family::LogconcaveSmoothed, Family::Kde]);
    let opts = FitOptions {
        eta: a.eta,
        lc_tol: DEFAULT_TOL,
        bandwidth: a.bandwidth,
    };
    let table = crossval_risk(&x, &fams, a.folds, a.seed, &opts)?;
    let mut doc = document("crossval");
    extend(&mut doc, &table);
    let rows = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "method": r.method, "mise_err": num(r.mise_err), "mise_err_se": num(r.mise_err_se),
                "neg_loglik": num(r.neg_loglik), "neg_loglik_se": num(r.neg_loglik_se),
                "folds_used": r.folds_used, "failures": r.failures.len(),
            })
        })
        .collect();
    Ok(Output::with_rows(doc, rows))
}

fn near_data(a: &NearDataArgs) -> Result<Output> {
    let x = read_samples(&a.x)?;
    let y = read_samples(&a.y)?;
    let mut spec = NearDataSpec::new(a.reps, a.seed);
    spec.p = a.p;
    spec.alpha = a.alpha;
    spec.projection_size = a.projection_size;
    if let Some(g) = &a.gammas {
        spec.gammas = g.clone();
    }
    let curves = power_near_data(&x, &y, &spec, &methods(&a.stat, &a.family, false))?;
    let mut doc = document("power-near-data");
    doc.insert("spec".into(), serde_json::to_value(&spec).expect("serializable"));
    doc.insert("curves".into(), serde_json::to_value(&curves).expect("serializable"));
    Ok(Output::with_rows(doc, curve_rows(&curves)))
}

pub fn dispatch(cli: &Cli) -> Result<String> {
    let out = match &cli.command {
        Command::Density(a) => density(a)?,
        Command::Dominance(a) => dominance(a)?,
        Command::Hellinger(a) => hellinger(a)?,
        Command::Simulate(SimulateCommand::Power(a)) => sim_power(a)?,
        Command::Simulate(SimulateCommand::Hellinger(a)) => sim_hellinger(a)?,
        Command::Crossval(a) => crossval(a)?,
        Command::PowerNearData(a) => near_data(a)?,
    };
    Ok(out.render(cli.format))
}

/// Worker count from `SHAPESTAT_THREADS`; 0 or unset lets rayon decide.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a nonnegative integer, got '{s}'"))),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({"schema_version": SCHEMA_VERSION, "error": {"kind": kind, "message": message}}).to_string()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_json("usage", &e.render().to_string()));
            return 2;
        }
    };
    let result = threads_from_env().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))?;
        let text = pool.install(|| dispatch(&cli))?;
        io::write_output(&text, cli.output.as_deref())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == 3 { "numerical" } else { "input" };
            eprintln!("{}", error_json(kind, &e.to_string()));
            code
        }
    }
}
