//! Squared Hellinger distance `ℋ²(f, g) = 1 − ∫√(fg)` between fitted
//! densities, its influence functions, and Wald intervals from the plug-in
//! variance `σ² = (2ℋ² − ℋ⁴)/(4λ(1 − λ))`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::density::{DistributionHandle, Family, FitOptions, Model};
use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::kde::Bandwidth;
use crate::logconcave::segment;
use crate::quad::integrate_with_breaks;
use crate::special::norm_quantile;

const QUAD_TOL: f64 = 1e-8;

/// Pieces `(x₀, x₁, φ₀, φ₁)` on which the log-density is linear, for the
/// families where that representation is exact.
fn log_linear_pieces(h: &DistributionHandle) -> Option<Vec<(f64, f64, f64, f64)>> {
    match h.model() {
        Model::Step(f) => {
            let b = f.breakpoints();
            Some(
                f.heights()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (b[i], b[i + 1], v.ln(), v.ln()))
                    .collect(),
            )
        }
        Model::LogConcave(f) => Some(f.pieces().collect()),
        _ => None,
    }
}

/// `∫√(fg)` for two piecewise log-linear densities, on the common
/// refinement of their pieces.
fn affinity_exact(a: &[(f64, f64, f64, f64)], b: &[(f64, f64, f64, f64)]) -> f64 {
    let mut cuts: Vec<f64> = a.iter().flat_map(|p| [p.0, p.1]).chain(b.iter().flat_map(|p| [p.0, p.1])).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].1.min(b[b.len() - 1].1);
    let at = |ps: &[(f64, f64, f64, f64)], x: f64, right: bool| -> f64 {
        // log-density just inside the sub-interval
        let i = if right {
            ps.partition_point(|p| p.1 < x)
        } else {
            ps.partition_point(|p| p.1 <= x)
        };
        let (x0, x1, p0, p1) = ps[i.min(ps.len() - 1)];
        p0 + (p1 - p0) * ((x - x0) / (x1 - x0)).clamp(0.0, 1.0)
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if l < lo || r > hi {
            continue;
        }
        let fa = (at(a, l, false), at(a, r, true));
        let fb = (at(b, l, false), at(b, r, true));
        let (s0, s1) = (0.5 * (fa.0 + fb.0), 0.5 * (fa.1 + fb.1));
        if s0 == f64::NEG_INFINITY || s1 == f64::NEG_INFINITY {
            continue;
        }
        total += segment(s0, s1, r - l).j;
    }
    total
}

/// `1 − ∫√(fg)`. Step and log-concave pairs are integrated exactly; pairs
/// involving a smoothed or kernel fit use adaptive quadrature over the union
/// of the effective supports.
pub fn hellinger_sq(fa: &DistributionHandle, fb: &DistributionHandle) -> Result<f64> {
    if !fa.has_density() || !fb.has_density() {
        return Err(Error::invalid("Hellinger distance needs densities, not empirical distributions"));
    }
    for h in [fa, fb] {
        if let Model::Step(f) = h.model() {
            if (f.total_mass() - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("density integrates to {}, not 1", f.total_mass())));
            }
        }
    }
    let affinity = match (log_linear_pieces(fa), log_linear_pieces(fb)) {
        (Some(a), Some(b)) => affinity_exact(&a, &b),
        _ => {
            let (la, ha) = fa.range();
            let (lb, hb) = fb.range();
            let mut breaks = fa.breakpoints();
            breaks.extend(fb.breakpoints());
            integrate_with_breaks(|x| (fa.pdf(x) * fb.pdf(x)).sqrt(), la.min(lb), ha.max(hb), &breaks, QUAD_TOL)
        }
    };
    Ok((1.0 - affinity).clamp(0.0, 1.0))
}

fn in_support(h: &DistributionHandle, x: f64) -> bool {
    match h.model() {
        Model::Step(_) | Model::LogConcave(_) => {
            let (lo, hi) = h.range();
            x >= lo && x <= hi
        }
        // positive everywhere; zero only through underflow far in the tails
        _ => h.pdf(x) > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    F,
    G,
}

/// Influence function of `ℋ²` for the first (`F`) or second (`G`) density:
/// `ψ_f(x) = ½(1 − √(g(x)/f(x)) − ℋ²)` on the support of `f`, zero off it.
pub fn influence_psi(which: Which, x: f64, fa: &DistributionHandle, fb: &DistributionHandle, h2: f64) -> Result<f64> {
    let (own, other) = match which {
        Which::F => (fa, fb),
        Which::G => (fb, fa),
    };
    if !in_support(own, x) {
        return Ok(0.0);
    }
    let d = own.pdf(x);
    if !(d > 0.0) {
        return Err(Error::Numerical(format!("density vanishes at {x} inside its support")));
    }
    // separate square roots keep the ratio finite for subnormal densities
    Ok(0.5 * (1.0 - other.pdf(x).sqrt() / d.sqrt() - h2))
}

/// `(2ℋ² − ℋ⁴)/(4λ(1 − λ))`.
pub fn sigma2(h2: f64, lambda: f64) -> f64 {
    (2.0 * h2 - h2 * h2) / (4.0 * lambda * (1.0 - lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HellingerEstimator {
    Unimodal,
    Logconcave,
    LogconcaveSmoothed,
    KdeNaive,
    KdeBiasCorrected,
}

impl HellingerEstimator {
    pub const ALL: [HellingerEstimator; 5] = [
        HellingerEstimator::Unimodal,
        HellingerEstimator::Logconcave,
        HellingerEstimator::LogconcaveSmoothed,
        HellingerEstimator::KdeNaive,
        HellingerEstimator::KdeBiasCorrected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HellingerEstimator::Unimodal => "unimodal",
            HellingerEstimator::Logconcave => "logconcave",
            HellingerEstimator::LogconcaveSmoothed => "logconcave-smoothed",
            HellingerEstimator::KdeNaive => "kde-naive",
            HellingerEstimator::KdeBiasCorrected => "kde-bias-corrected",
        }
    }

    /// Whether a Wald interval is reported.
    pub fn has_ci(self) -> bool {
        self != HellingerEstimator::KdeNaive
    }
}

impl fmt::Display for HellingerEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HellingerEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HellingerEstimator::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown Hellinger estimator '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HellingerResult {
    pub family: HellingerEstimator,
    pub h2: f64,
    /// Estimate before clamping to `[0, 1]`.
    pub h2_raw: f64,
    pub sigma2: f64,
    pub ci_level: f64,
    pub ci_h2: Option<[f64; 2]>,
    pub ci_h2_unclamped: Option<[f64; 2]>,
    pub ci_h: Option<[f64; 2]>,
    pub lambda_hat: f64,
    pub n_x: usize,
    pub n_y: usize,
}

fn wald(family: HellingerEstimator, h2_raw: f64, m: usize, n: usize, ci_level: f64) -> Result<HellingerResult> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::invalid(format!("ci level must lie in (0, 1), got {ci_level}")));
    }
    let h2 = h2_raw.clamp(0.0, 1.0);
    let big_n = (m + n) as f64;
    let lambda = m as f64 / big_n;
    let s2 = sigma2(h2, lambda);
    let (ci_h2, ci_h2_unclamped, ci_h) = if family.has_ci() {
        let half = norm_quantile(0.5 * (1.0 + ci_level))? * (s2 / big_n).sqrt();
        let raw = [h2 - half, h2 + half];
        let cl = [raw[0].clamp(0.0, 1.0), raw[1].clamp(0.0, 1.0)];
        (Some(cl), Some(raw), Some([cl[0].sqrt(), cl[1].sqrt()]))
    } else {
        (None, None, None)
    };
    Ok(HellingerResult {
        family,
        h2,
        h2_raw,
        sigma2: s2,
        ci_level,
        ci_h2,
        ci_h2_unclamped,
        ci_h,
        lambda_hat: lambda,
        n_x: m,
        n_y: n,
    })
}

/// Plug-in estimate from fits of one family to each sample, with a Wald
/// interval (none for the naive kernel estimate).
pub fn estimate_hellinger(x: &Sample, y: &Sample, family: HellingerEstimator, ci_level: f64) -> Result<HellingerResult> {
    estimate_hellinger_many(x, y, &[family], ci_level).pop().expect("one estimator")
}

/// Several estimators on the same pair of samples; fits shared between
/// estimators (the kernel fits of the naive and bias-corrected estimates)
/// are computed once.
pub fn estimate_hellinger_many(
    x: &Sample,
    y: &Sample,
    estimators: &[HellingerEstimator],
    ci_level: f64,
) -> Vec<Result<HellingerResult>> {
    if x.len() < 2 || y.len() < 2 {
        return estimators
            .iter()
            .map(|_| Err(Error::invalid("Hellinger estimation needs at least two observations per sample")))
            .collect();
    }
    let opts = FitOptions {
        eta: Some(1.0 / (x.len() + y.len()) as f64),
        bandwidth: Bandwidth::Lscv,
        ..FitOptions::default()
    };
    let mut cache: Vec<(Family, Result<(DistributionHandle, DistributionHandle)>)> = Vec::new();
    let mut fits = |fam: Family| -> Result<(DistributionHandle, DistributionHandle)> {
        if let Some((_, r)) = cache.iter().find(|(f, _)| *f == fam) {
            return clone_result(r);
        }
        let r = DistributionHandle::fit(x, fam, &opts)
            .map_err(|e| e.context("fitting the first sample"))
            .and_then(|fx| {
                DistributionHandle::fit(y, fam, &opts)
                    .map_err(|e| e.context("fitting the second sample"))
                    .map(|fy| (fx, fy))
            });
        let out = clone_result(&r);
        cache.push((fam, r));
        out
    };
    estimators
        .iter()
        .map(|&est| {
            let fam = match est {
                HellingerEstimator::Unimodal => Family::Unimodal,
                HellingerEstimator::Logconcave => Family::Logconcave,
                HellingerEstimator::LogconcaveSmoothed => Family::LogconcaveSmoothed,
                HellingerEstimator::KdeNaive | HellingerEstimator::KdeBiasCorrected => Family::Kde,
            };
            let (fx, fy) = fits(fam)?;
            let raw = if est == HellingerEstimator::KdeBiasCorrected {
                if x.len() < 3 || y.len() < 3 {
                    return Err(Error::invalid(
                        "the bias-corrected estimator needs at least three observations per sample",
                    ));
                }
                one_step(x, y, &fx, &fy)?
            } else {
                hellinger_sq(&fx, &fy)?
            };
            wald(est, raw, x.len(), y.len(), ci_level)
        })
        .collect()
}

fn clone_result(r: &Result<(DistributionHandle, DistributionHandle)>) -> Result<(DistributionHandle, DistributionHandle)> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) if e.is_numerical() => Err(Error::Numerical(e.to_string())),
        Err(e) => Err(Error::Degenerate(e.to_string())),
    }
}

/// `1 − ½(∫√(ĝ/f̂) d𝔽ₘ + ∫√(f̂/ĝ) d𝔾ₙ)`, ratios formed in log space.
fn one_step(x: &Sample, y: &Sample, fx: &DistributionHandle, fy: &DistributionHandle) -> Result<f64> {
    let avg = |pts: &[f64], own: &DistributionHandle, other: &DistributionHandle| {
        pts.iter()
            .map(|&v| (0.5 * (other.pdf(v).ln() - own.pdf(v).ln())).exp())
            .sum::<f64>()
            / pts.len() as f64
    };
    let raw = 1.0 - 0.5 * (avg(x.values(), fx, fy) + avg(y.values(), fy, fx));
    if !raw.is_finite() {
        return Err(Error::Numerical("non-finite bias-corrected estimate".into()));
    }
    Ok(raw)
}

/// One-step estimate `1 − ½(∫√(ĝ/f̂) d𝔽ₘ + ∫√(f̂/ĝ) d𝔾ₙ)` with LSCV kernel
/// fits; the reported value is clamped to `[0, 1]` and the raw value kept.
pub fn kde_bias_corrected(x: &Sample, y: &Sample, ci_level: f64) -> Result<HellingerResult> {
    estimate_hellinger(x, y, HellingerEstimator::KdeBiasCorrected, ci_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Model;
    use crate::kde::KdeFit;
    use crate::unimodal::StepDensity;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn normal(seed: u64, n: usize, mu: f64) -> Sample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, 1.0).unwrap();
        Sample::new((0..n).map(|_| d.sample(&mut rng)).collect()).unwrap()
    }

    fn fit(s: &Sample, fam: Family) -> DistributionHandle {
        DistributionHandle::fit(s, fam, &FitOptions::default()).unwrap()
    }

    fn step(b: Vec<f64>, h: Vec<f64>) -> DistributionHandle {
        let s = Sample::new(b.clone()).unwrap();
        let mode = b[0];
        DistributionHandle::from_model(Model::Step(StepDensity::new(b, h, mode).unwrap()), Family::Unimodal, &s)
    }

    #[test]
    fn identical_and_disjoint() {
        let s = normal(1, 60, 0.0);
        for fam in [Family::Unimodal, Family::Logconcave, Family::LogconcaveSmoothed, Family::Kde] {
            let f = fit(&s, fam);
            assert!(hellinger_sq(&f, &f).unwrap() < 1e-10, "{fam}");
        }
        let a = step(vec![0.0, 1.0], vec![1.0]);
        let b = step(vec![2.0, 4.0], vec![0.5]);
        assert_eq!(hellinger_sq(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn step_lattice_value() {
        let a = step(vec![0.0, 1.0, 2.0], vec![0.75, 0.25]);
        let b = step(vec![0.5, 2.5], vec![0.5]);
        let exact = 1.0 - ((0.75f64 * 0.5).sqrt() * 0.5 + (0.25f64 * 0.5).sqrt());
        assert!((hellinger_sq(&a, &b).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn gaussian_truth_via_quadrature() {
        // kernel fits with a single point are exact normals
        let a = DistributionHandle::from_model(
            Model::Kde(KdeFit::new(&Sample::new(vec![0.0]).unwrap(), 1.0).unwrap()),
            Family::Kde,
            &Sample::new(vec![0.0]).unwrap(),
        );
        let b = DistributionHandle::from_model(
            Model::Kde(KdeFit::new(&Sample::new(vec![1.0]).unwrap(), 1.0).unwrap()),
            Family::Kde,
            &Sample::new(vec![1.0]).unwrap(),
        );
        let v = hellinger_sq(&a, &b).unwrap();
        assert!((v - (1.0 - (-0.125f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn exact_paths_match_quadrature() {
        let (x, y) = (normal(2, 80, 0.0), normal(3, 70, 0.8));
        for fam in [Family::Unimodal, Family::Logconcave] {
            let (fx, fy) = (fit(&x, fam), fit(&y, fam));
            let mut br = fx.breakpoints();
            br.extend(fy.breakpoints());
            let (lo, hi) = (fx.range().0.min(fy.range().0), fx.range().1.max(fy.range().1));
            let q = integrate_with_breaks(|t| (fx.pdf(t) * fy.pdf(t)).sqrt(), lo, hi, &br, 1e-13);
            assert!((hellinger_sq(&fx, &fy).unwrap() - (1.0 - q)).abs() < 1e-10, "{fam}");
        }
        // mixed step and log-concave
        let (fx, fy) = (fit(&x, Family::Unimodal), fit(&y, Family::Logconcave));
        let mut br = fx.breakpoints();
        br.extend(fy.breakpoints());
        let q = integrate_with_breaks(|t| (fx.pdf(t) * fy.pdf(t)).sqrt(), -10.0, 10.0, &br, 1e-13);
        assert!((hellinger_sq(&fx, &fy).unwrap() - (1.0 - q)).abs() < 1e-10);
        assert_eq!(hellinger_sq(&fx, &fy).unwrap(), hellinger_sq(&fy, &fx).unwrap());
    }

    #[test]
    fn influence_functions() {
        let (x, y) = (normal(4, 100, 0.0), normal(5, 90, 0.5));
        let (f, g) = (fit(&x, Family::LogconcaveSmoothed), fit(&y, Family::LogconcaveSmoothed));
        assert_eq!(influence_psi(Which::F, 0.3, &f, &f, 0.0).unwrap(), 0.0);
        let h2 = hellinger_sq(&f, &g).unwrap();
        let (lo, hi) = (f.range().0.min(g.range().0), f.range().1.max(g.range().1));
        let mut br = f.breakpoints();
        br.extend(g.breakpoints());
        let mean = integrate_with_breaks(|t| influence_psi(Which::F, t, &f, &g, h2).unwrap() * f.pdf(t), lo, hi, &br, 1e-10);
        assert!(mean.abs() < 1e-6);
        let lam = 0.4;
        let vf = integrate_with_breaks(|t| influence_psi(Which::F, t, &f, &g, h2).unwrap().powi(2) * f.pdf(t), lo, hi, &br, 1e-11);
        let vg = integrate_with_breaks(|t| influence_psi(Which::G, t, &f, &g, h2).unwrap().powi(2) * g.pdf(t), lo, hi, &br, 1e-11);
        assert!((vf / lam + vg / (1.0 - lam) - sigma2(h2, lam)).abs() < 1e-6);
    }

    #[test]
    fn wald_arithmetic() {
        assert!((sigma2(0.2, 0.5) - 0.36).abs() < 1e-15);
        let x = normal(6, 40, 0.0);
        let r = estimate_hellinger(&x, &x, HellingerEstimator::Logconcave, 0.95).unwrap();
        assert_eq!(r.h2, 0.0);
        assert_eq!(r.ci_h2.unwrap()[0], 0.0);
        let r = estimate_hellinger(&x, &x, HellingerEstimator::KdeNaive, 0.95).unwrap();
        assert!(r.ci_h2.is_none());
        let r = kde_bias_corrected(&x, &x, 0.95).unwrap();
        assert!(r.h2_raw.abs() < 1e-15);
    }

    #[test]
    fn equivariance_and_triangle() {
        let (x, y, z) = (normal(7, 50, 0.0), normal(8, 60, 0.7), normal(9, 55, -0.4));
        let t = |v: f64| (v - 3.0) / 0.25;
        let (tx, ty) = (x.map(t).unwrap(), y.map(t).unwrap());
        for est in HellingerEstimator::ALL {
            let a = estimate_hellinger(&x, &y, est, 0.9).unwrap().h2;
            let b = estimate_hellinger(&tx, &ty, est, 0.9).unwrap().h2;
            assert!((a - b).abs() < 1e-8, "{est}: {a} vs {b}");
        }
        let (fx, fy, fz) = (fit(&x, Family::Logconcave), fit(&y, Family::Logconcave), fit(&z, Family::Logconcave));
        let d = |a: &DistributionHandle, b: &DistributionHandle| hellinger_sq(a, b).unwrap().sqrt();
        assert!(d(&fx, &fz) <= d(&fx, &fy) + d(&fy, &fz) + 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_for_every_family(seed in 0u64..1000) {
            let (x, y) = (normal(seed, 30, 0.0), normal(seed + 7, 25, 1.0));
            for fam in [Family::Unimodal, Family::Logconcave, Family::LogconcaveSmoothed, Family::Kde] {
                let (a, b) = (fit(&x, fam), fit(&y, fam));
                let (u, v) = (hellinger_sq(&a, &b).unwrap(), hellinger_sq(&b, &a).unwrap());
                prop_assert!((u - v).abs() <= 1e-10);
                prop_assert!((0.0..=1.0).contains(&u));
            }
        }
    }
}
