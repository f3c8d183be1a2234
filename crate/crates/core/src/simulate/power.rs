use serde::Serialize;

use super::rng::stream;
use super::zoo::{dominance_pair, DominanceCase, Dist};
use super::{proportion, replicates};
use crate::density::{DistributionHandle, Family, FitOptions};
use crate::dominance::{test_with_handles, DominanceConfig, Statistic};
use crate::empirical::Sample;
use crate::error::{Error, Result};

pub(crate) const STUDY_DOMINANCE: u64 = 1;

/// A dominance study: one case over a grid of `γ`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSpec {
    pub case: DominanceCase,
    pub gammas: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// `m = n = 100`, `p = α = 0.05` on the default `γ` grid.
    pub fn new(case: DominanceCase, replicates: usize, seed: u64) -> Self {
        ScenarioSpec {
            case,
            gammas: super::default_gamma_grid(),
            m: 100,
            n: 100,
            p: 0.05,
            alpha: 0.05,
            replicates,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.m < 2 || self.n < 2 {
            return Err(Error::invalid("sample sizes must be at least 2"));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::invalid("gamma grid must be nonempty and lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Method {
    pub statistic: Statistic,
    pub family: Family,
    pub conservative: bool,
}

impl Method {
    pub fn new(statistic: Statistic, family: Family) -> Self {
        Method {
            statistic,
            family,
            conservative: false,
        }
    }

    pub fn conservative(self) -> Self {
        Method {
            conservative: true,
            ..self
        }
    }

    fn config(&self, p: f64, alpha: f64) -> DominanceConfig {
        DominanceConfig {
            p,
            alpha,
            conservative: self.conservative,
            ..DominanceConfig::new(self.family, self.statistic)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub gamma: f64,
    /// Rejection rate among replicates that completed.
    pub estimate: f64,
    pub se: f64,
    pub reps: usize,
    /// Replicates where a fit or the statistic failed.
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerCurve {
    pub case: String,
    pub statistic: Statistic,
    pub family: Family,
    pub conservative: bool,
    pub m: usize,
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub points: Vec<CurvePoint>,
}

/// Draws `X₁..X_m ~ F` and `Y₁..Y_n ~ G`.
pub fn sample_scenario<R: rand::Rng + ?Sized>(f: &Dist, g: &Dist, m: usize, n: usize, rng: &mut R) -> (Sample, Sample) {
    let x = f.sample(rng, m);
    let y = g.sample(rng, n);
    (
        Sample::new(x).expect("finite draws"),
        Sample::new(y).expect("finite draws"),
    )
}

/// Outcome of each method on one pair of samples: `Some(reject)`, or
/// `None` when fitting or testing failed. Fits are shared across methods.
pub(crate) fn run_methods(x: &Sample, y: &Sample, methods: &[Method], p: f64, alpha: f64) -> Vec<Option<bool>> {
    let opts = FitOptions {
        eta: Some(1.0 / (x.len() + y.len()) as f64),
        ..FitOptions::default()
    };
    let mut fits: Vec<(Family, Option<(DistributionHandle, DistributionHandle)>)> = Vec::new();
    methods
        .iter()
        .map(|m| {
            if !fits.iter().any(|(f, _)| *f == m.family) {
                let pair = DistributionHandle::fit(x, m.family, &opts)
                    .and_then(|a| DistributionHandle::fit(y, m.family, &opts).map(|b| (a, b)));
                if let Err(e) = &pair {
                    log::debug!("{} fit failed: {e}", m.family);
                }
                fits.push((m.family, pair.ok()));
            }
            let (f1, f2) = fits.iter().find(|(f, _)| *f == m.family).unwrap().1.as_ref()?;
            match test_with_handles(f1, f2, x, y, &m.config(p, alpha)) {
                Ok(r) => Some(r.reject),
                Err(e) => {
                    log::debug!("{} {} failed: {e}", m.family, m.statistic);
                    None
                }
            }
        })
        .collect()
}

pub(crate) fn aggregate(gamma: f64, outcomes: &[Vec<Option<bool>>], method: usize) -> CurvePoint {
    let done: Vec<bool> = outcomes.iter().filter_map(|o| o[method]).collect();
    let hits = done.iter().filter(|&&r| r).count();
    let (estimate, se) = proportion(hits, done.len());
    CurvePoint {
        gamma,
        estimate,
        se,
        reps: done.len(),
        failures: outcomes.len() - done.len(),
    }
}

pub(crate) fn validate_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::invalid("no test requested"));
    }
    for m in methods {
        if m.conservative && m.statistic != Statistic::Tsep {
            return Err(Error::invalid("the conservative critical value applies to tsep only"));
        }
        if m.family == Family::Kde {
            return Err(Error::invalid("dominance tests do not support the kde family"));
        }
    }
    Ok(())
}

/// Rejection frequency of one test across the `γ` grid.
pub fn power_curve(spec: &ScenarioSpec, statistic: Statistic, family: Family, conservative: bool) -> Result<PowerCurve> {
    let method = Method {
        statistic,
        family,
        conservative,
    };
    Ok(power_curves(spec, &[method])?.pop().expect("one curve"))
}

/// Several tests on common random numbers: every method sees the same
/// samples in each replicate.
pub fn power_curves(spec: &ScenarioSpec, methods: &[Method]) -> Result<Vec<PowerCurve>> {
    spec.validate()?;
    validate_methods(methods)?;
    let mut curves: Vec<PowerCurve> = methods
        .iter()
        .map(|m| PowerCurve {
            case: spec.case.to_string(),
            statistic: m.statistic,
            family: m.family,
            conservative: m.conservative,
            m: spec.m,
            n: spec.n,
            p: spec.p,
            alpha: spec.alpha,
            points: Vec::with_capacity(spec.gammas.len()),
        })
        .collect();
    for &gamma in &spec.gammas {
        let (f, g) = dominance_pair(spec.case, gamma)?;
        let key = [STUDY_DOMINANCE, spec.case.index(), gamma.to_bits(), spec.m as u64, spec.n as u64];
        let outcomes = replicates(spec.replicates, |rep| {
            let mut rng = stream(spec.seed, &key, rep);
            let (x, y) = sample_scenario(&f, &g, spec.m, spec.n, &mut rng);
            run_methods(&x, &y, methods, spec.p, spec.alpha)
        });
        for (i, c) in curves.iter_mut().enumerate() {
            c.points.push(aggregate(gamma, &outcomes, i));
        }
    }
    Ok(curves)
}
