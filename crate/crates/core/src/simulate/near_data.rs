use serde::Serialize;

use super::power::{aggregate, run_methods, validate_methods, Method, PowerCurve};
use super::replicates;
use super::rng::stream;
use super::zoo::Dist;
use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::logconcave::{lc_fit, lc_smooth, SmoothedLogConcaveFit, DEFAULT_TOL};

const STUDY_NEAR_DATA: u64 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct NearDataSpec {
    pub gammas: Vec<f64>,
    pub replicates: usize,
    pub p: f64,
    pub alpha: f64,
    /// Draws from each mixture used to approximate its projection.
    pub projection_size: usize,
    pub seed: u64,
}

impl NearDataSpec {
    pub fn new(replicates: usize, seed: u64) -> Self {
        NearDataSpec {
            gammas: super::default_gamma_grid(),
            replicates,
            p: 0.05,
            alpha: 0.05,
            projection_size: 1000,
            seed,
        }
    }
}

fn smoothed(sample: &Sample, what: &str) -> Result<SmoothedLogConcaveFit> {
    lc_fit(sample, DEFAULT_TOL)
        .and_then(|b| lc_smooth(&b, sample))
        .map_err(|e| e.context(format!("smoothed log-concave fit of {what}")))
}

/// Power at alternatives interpolating between the pooled smoothed
/// log-concave fit (`γ = 0`) and the per-sample fits (`γ = 1`). Each
/// mixture is replaced by the smoothed log-concave fit of a large draw from
/// it, and the tests are run on fresh samples of the original sizes.
pub fn power_near_data(x: &Sample, y: &Sample, spec: &NearDataSpec, methods: &[Method]) -> Result<Vec<PowerCurve>> {
    validate_methods(methods)?;
    if spec.replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    if spec.gammas.is_empty() || spec.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::invalid("gamma grid must be nonempty and lie in [0, 1]"));
    }
    if spec.projection_size < 2 {
        return Err(Error::invalid("projection size must be at least 2"));
    }
    let fx = smoothed(x, "the first sample")?;
    let fy = smoothed(y, "the second sample")?;
    let f0 = smoothed(&Sample::pooled(x, y), "the pooled sample")?;
    let (m, n) = (x.len(), y.len());
    let mut curves: Vec<PowerCurve> = methods
        .iter()
        .map(|mt| PowerCurve {
            case: "near-data".into(),
            statistic: mt.statistic,
            family: mt.family,
            conservative: mt.conservative,
            m,
            n,
            p: spec.p,
            alpha: spec.alpha,
            points: Vec::new(),
        })
        .collect();
    for &gamma in &spec.gammas {
        let key = [STUDY_NEAR_DATA, gamma.to_bits(), m as u64, n as u64];
        let project = |own: &SmoothedLogConcaveFit, stream_id: u64, what: &str| -> Result<Dist> {
            let mix = Dist::Mixture(vec![
                (1.0 - gamma, Dist::Smoothed(Box::new(f0.clone()))),
                (gamma, Dist::Smoothed(Box::new(own.clone()))),
            ]);
            let mut rng = stream(spec.seed, &key, u64::MAX - stream_id);
            let draw = Sample::new(mix.sample(&mut rng, spec.projection_size))?;
            Ok(Dist::Smoothed(Box::new(smoothed(
                &draw,
                &format!("the {what} mixture at gamma = {gamma}"),
            )?)))
        };
        let px = project(&fx, 0, "first")?;
        let py = project(&fy, 1, "second")?;
        let outcomes = replicates(spec.replicates, |rep| {
            let mut rng = stream(spec.seed, &key, rep);
            let xs = Sample::new(px.sample(&mut rng, m)).expect("finite draws");
            let ys = Sample::new(py.sample(&mut rng, n)).expect("finite draws");
            run_methods(&xs, &ys, methods, spec.p, spec.alpha)
        });
        for (i, c) in curves.iter_mut().enumerate() {
            c.points.push(aggregate(gamma, &outcomes, i));
        }
    }
    Ok(curves)
}
