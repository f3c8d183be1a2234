//! Monte Carlo studies: power curves of the dominance tests, accuracy of
//! the Hellinger estimators, cross-validated density risks, and power at
//! alternatives built from observed data.
//!
//! Replicates run on the current rayon pool; results are collected in
//! replicate order and reduced sequentially, so outputs are bit-identical
//! for any number of workers.

mod crossval;
mod hellinger_exp;
mod near_data;
mod power;
pub mod rng;
mod zoo;

use rayon::prelude::*;

pub use crossval::{crossval_risk, fold_assignment, fold_risk, FoldFailure, RiskRow, RiskTable};
pub use hellinger_exp::{hellinger_experiment, HellingerCurve, HellingerPoint, HellingerSpec};
pub use near_data::{power_near_data, NearDataSpec};
pub use power::{power_curve, power_curves, sample_scenario, CurvePoint, Method, PowerCurve, ScenarioSpec};
pub use zoo::{
    dominance_pair, hellinger_pair, hellinger_sq_quadrature, hellinger_truth_closed_form, DominanceCase, Dist,
    HellingerCase,
};

/// Default replicate count of the published studies.
pub const PAPER_REPLICATES: usize = 10_000;

/// `0, 0.1, …, 1`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Maps `f` over replicate indices in parallel, keeping index order.
pub(crate) fn replicates<T: Send>(count: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Neumaier-compensated sum.
pub(crate) fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Binomial proportion and its standard error `√(p̂(1 − p̂)/R)`.
pub(crate) fn proportion(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}
