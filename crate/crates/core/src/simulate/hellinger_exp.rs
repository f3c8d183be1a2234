use serde::Serialize;

use super::rng::stream;
use super::zoo::{hellinger_pair, hellinger_sq_quadrature, hellinger_truth_closed_form, HellingerCase};
use super::{proportion, replicates, sum};
use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::hellinger::{estimate_hellinger_many, HellingerEstimator, HellingerResult};
use crate::logconcave::SmoothedLogConcaveFit;

const STUDY_HELLINGER: u64 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct HellingerSpec {
    pub case: HellingerCase,
    /// Common size of both samples at each grid point.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub estimators: Vec<HellingerEstimator>,
    pub ci_level: f64,
    pub seed: u64,
}

impl HellingerSpec {
    /// `n = 50, 100, …, 500` with every estimator.
    pub fn new(case: HellingerCase, replicates: usize, seed: u64) -> Self {
        HellingerSpec {
            case,
            n_grid: (1..=10).map(|k| 50 * k).collect(),
            replicates,
            estimators: HellingerEstimator::ALL.to_vec(),
            ci_level: 0.95,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HellingerPoint {
    pub n: usize,
    pub estimator: HellingerEstimator,
    /// Mean of the clamped estimates.
    pub estimate: f64,
    /// Monte Carlo standard error of `estimate`.
    pub se: f64,
    pub reps: usize,
    pub failures: usize,
    pub bias: f64,
    /// `√n · |bias|`.
    pub scaled_abs_bias: f64,
    pub mse: f64,
    /// `n · MSE`.
    pub scaled_mse: f64,
    pub mean_abs_error: f64,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub mean_ci_length: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HellingerCurve {
    pub case: HellingerCase,
    pub truth: f64,
    pub ci_level: f64,
    pub points: Vec<HellingerPoint>,
}

fn summarize(n: usize, est: HellingerEstimator, truth: f64, rs: &[&HellingerResult], failures: usize) -> HellingerPoint {
    let r = rs.len() as f64;
    let mean = sum(rs.iter().map(|x| x.h2)) / r;
    let var = sum(rs.iter().map(|x| (x.h2 - mean).powi(2))) / (r - 1.0).max(1.0);
    let bias = mean - truth;
    let mse = sum(rs.iter().map(|x| (x.h2 - truth).powi(2))) / r;
    let mae = sum(rs.iter().map(|x| (x.h2 - truth).abs())) / r;
    let (coverage, coverage_se, len) = if est.has_ci() {
        let hits = rs
            .iter()
            .filter(|x| x.ci_h2.is_some_and(|[lo, hi]| lo <= truth && truth <= hi))
            .count();
        let (c, se) = proportion(hits, rs.len());
        let len = sum(rs.iter().filter_map(|x| x.ci_h2).map(|[lo, hi]| hi - lo)) / r;
        (Some(c), Some(se), Some(len))
    } else {
        (None, None, None)
    };
    HellingerPoint {
        n,
        estimator: est,
        estimate: mean,
        se: (var / r).sqrt(),
        reps: rs.len(),
        failures,
        bias,
        scaled_abs_bias: (n as f64).sqrt() * bias.abs(),
        mse,
        scaled_mse: n as f64 * mse,
        mean_abs_error: mae,
        coverage,
        coverage_se,
        mean_ci_length: len,
    }
}

/// Bias, MSE and interval coverage of each estimator against the true
/// `ℋ²`, for each common sample size. `reference` supplies the two smoothed
/// log-concave fits that define case `c`.
pub fn hellinger_experiment(
    spec: &HellingerSpec,
    reference: Option<(&SmoothedLogConcaveFit, &SmoothedLogConcaveFit)>,
) -> Result<HellingerCurve> {
    if spec.replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    if spec.estimators.is_empty() {
        return Err(Error::invalid("no estimator requested"));
    }
    if spec.n_grid.is_empty() || spec.n_grid.iter().any(|&n| n < 3) {
        return Err(Error::invalid("sample sizes must be at least 3"));
    }
    if !(spec.ci_level > 0.0 && spec.ci_level < 1.0) {
        return Err(Error::invalid(format!("ci level must lie in (0, 1), got {}", spec.ci_level)));
    }
    let (f, g) = hellinger_pair(spec.case, reference)?;
    let truth = hellinger_truth_closed_form(spec.case).unwrap_or_else(|| hellinger_sq_quadrature(&f, &g));
    let mut points = Vec::new();
    for &n in &spec.n_grid {
        let key = [STUDY_HELLINGER, spec.case.index(), n as u64];
        let results = replicates(spec.replicates, |rep| {
            let mut rng = stream(spec.seed, &key, rep);
            let x = Sample::new(f.sample(&mut rng, n)).expect("finite draws");
            let y = Sample::new(g.sample(&mut rng, n)).expect("finite draws");
            estimate_hellinger_many(&x, &y, &spec.estimators, spec.ci_level)
        });
        for (i, &est) in spec.estimators.iter().enumerate() {
            let ok: Vec<&HellingerResult> = results.iter().filter_map(|r| r[i].as_ref().ok()).collect();
            let failures = results.len() - ok.len();
            if ok.is_empty() {
                let err = results[0][i].as_ref().err().map(|e| e.to_string()).unwrap_or_default();
                return Err(Error::Numerical(format!("every replicate of {est} at n = {n} failed: {err}")));
            }
            points.push(summarize(n, est, truth, &ok, failures));
        }
    }
    Ok(HellingerCurve {
        case: spec.case,
        truth,
        ci_level: spec.ci_level,
        points,
    })
}
