use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::rng::stream;
use super::sum;
use crate::density::{DistributionHandle, Family, FitOptions};
use crate::empirical::Sample;
use crate::error::{Error, Result};

const STUDY_CROSSVAL: u64 = 4;
const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub method: Family,
    /// Mean over folds of `∫f̂² − 2·mean f̂(held out)`.
    pub mise_err: f64,
    /// Standard error of `mise_err` across folds.
    pub mise_err_se: f64,
    /// Mean negative log density at held-out points.
    pub neg_loglik: f64,
    pub neg_loglik_se: f64,
    pub folds_used: usize,
    pub failures: Vec<FoldFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskTable {
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<RiskRow>,
}

/// Fold label of each observation: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, &[STUDY_CROSSVAL, n as u64, folds as u64], 0));
    let mut fold = vec![0; n];
    for (i, &j) in perm.iter().enumerate() {
        fold[j] = i % folds;
    }
    fold
}

/// `(∫f̂² − 2·mean f̂(held out), mean −ln max(f̂, 10⁻¹²))` on held-out points.
pub fn fold_risk(h: &DistributionHandle, heldout: &[f64]) -> Result<(f64, f64)> {
    if heldout.is_empty() {
        return Err(Error::invalid("no held-out points"));
    }
    let k = heldout.len() as f64;
    let sq = h.integral_sq()?;
    let dens: Vec<f64> = heldout.iter().map(|&v| h.pdf(v)).collect();
    let mise = sq - 2.0 * sum(dens.iter().copied()) / k;
    let nll = sum(dens.iter().map(|&d| -d.max(DENSITY_FLOOR).ln())) / k;
    Ok((mise, nll))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = sum(v.iter().copied()) / k;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = sum(v.iter().map(|x| (x - m).powi(2))) / (k - 1.0);
    (m, (var / k).sqrt())
}

/// `folds`-fold cross-validated risks of each density estimator. A failed
/// fit is recorded against its fold and the fold skipped for that method.
pub fn crossval_risk(x: &Sample, methods: &[Family], folds: usize, seed: u64, opts: &FitOptions) -> Result<RiskTable> {
    if folds < 2 {
        return Err(Error::invalid("at least two folds are needed"));
    }
    if x.len() < folds {
        return Err(Error::invalid(format!("{} observations cannot fill {folds} folds", x.len())));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no method requested"));
    }
    if methods.contains(&Family::Empirical) {
        return Err(Error::invalid("the empirical family has no density to score"));
    }
    let assign = fold_assignment(x.len(), folds, seed);
    let split = |k: usize| -> (Vec<f64>, Vec<f64>) {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (&v, &f) in x.values().iter().zip(&assign) {
            if f == k {
                test.push(v);
            } else {
                train.push(v);
            }
        }
        (train, test)
    };
    let jobs: Vec<(Family, usize)> = methods.iter().flat_map(|&m| (0..folds).map(move |k| (m, k))).collect();
    let outcomes: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(method, k)| {
            let (train, test) = split(k);
            let train = Sample::new(train)?;
            let h = DistributionHandle::fit(&train, method, opts)?;
            fold_risk(&h, &test)
        })
        .collect();
    let rows = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let mut mise = Vec::new();
            let mut nll = Vec::new();
            let mut failures = Vec::new();
            for k in 0..folds {
                match &outcomes[i * folds + k] {
                    Ok((a, b)) => {
                        mise.push(*a);
                        nll.push(*b);
                    }
                    Err(e) => failures.push(FoldFailure {
                        fold: k,
                        message: e.to_string(),
                    }),
                }
            }
            let (mise_err, mise_err_se) = mean_se(&mise);
            let (neg_loglik, neg_loglik_se) = mean_se(&nll);
            RiskRow {
                method,
                mise_err,
                mise_err_se,
                neg_loglik,
                neg_loglik_se,
                folds_used: mise.len(),
                failures,
            }
        })
        .collect();
    Ok(RiskTable {
        n: x.len(),
        folds,
        seed,
        rows,
    })
}
