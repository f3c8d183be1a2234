//! Log-concave MLE convolved with a centred Gaussian whose variance makes
//! the fitted variance equal the sample variance (divisor `m`).
//!
//! On a piece `[s, s + δ]` where the base log-density is `a + β(y − s)`,
//! the density contribution at `x` is
//! `exp(a + β(x − s) + β²γ²/2) · [Φ(t₀ + βγ) − Φ(t₁ + βγ)]` with
//! `t₀ = (x − s)/γ`, `t₁ = (x − s − δ)/γ`, and integrating by parts gives
//! the CDF contribution `(e^b Φ(t₁) − e^a Φ(t₀) + pdf)/β`. For nearly flat
//! pieces the latter cancels, so `e^{βv}` is expanded to second order and
//! integrated against `Φ` exactly.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::{segment, LogConcaveFit};
use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::special::{log_norm_interval, norm_cdf, norm_pdf};

/// Beyond this many standard deviations `Φ` is 0 or 1 to double precision.
const SATURATE: f64 = 8.5;

#[derive(Debug, Clone, Serialize)]
pub struct SmoothedLogConcaveFit {
    base: LogConcaveFit,
    gamma_sq: f64,
}

/// Fits the smoothing variance `γ² = s² − Var(base)`, clamped at zero.
pub fn lc_smooth(base: &LogConcaveFit, sample: &Sample) -> Result<SmoothedLogConcaveFit> {
    let var = base.second_moment_about(sample.mean());
    let mut gamma_sq = sample.variance_pop() - var;
    if !gamma_sq.is_finite() {
        return Err(Error::Numerical("non-finite smoothing variance".into()));
    }
    if gamma_sq < 0.0 {
        if gamma_sq < -1e-10 * sample.variance_pop() {
            log::warn!("fit variance exceeds sample variance by {:e}; smoothing disabled", -gamma_sq);
        }
        gamma_sq = 0.0;
    }
    Ok(SmoothedLogConcaveFit {
        base: base.clone(),
        gamma_sq,
    })
}

impl SmoothedLogConcaveFit {
    pub fn new(base: LogConcaveFit, gamma_sq: f64) -> Result<Self> {
        if !(gamma_sq >= 0.0 && gamma_sq.is_finite()) {
            return Err(Error::invalid(format!("gamma_sq must be nonnegative, got {gamma_sq}")));
        }
        Ok(SmoothedLogConcaveFit { base, gamma_sq })
    }

    pub fn base(&self) -> &LogConcaveFit {
        &self.base
    }

    pub fn gamma_sq(&self) -> f64 {
        self.gamma_sq
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_sq.sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.base.mean()
    }

    pub fn variance(&self) -> f64 {
        self.base.variance() + self.gamma_sq
    }

    /// Interval outside which the density is below double precision.
    pub fn effective_support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        let pad = 12.0 * self.gamma();
        (lo - pad, hi + pad)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let g = self.gamma();
        if g == 0.0 {
            return self.base.pdf(x);
        }
        self.base
            .pieces()
            .map(|(s, e, a, b)| piece_pdf(s, e - s, a, b, x, g))
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let g = self.gamma();
        if g == 0.0 {
            return self.base.cdf(x);
        }
        let v: f64 = self
            .base
            .pieces()
            .map(|(s, e, a, b)| piece_cdf(s, e - s, a, b, x, g))
            .sum();
        v.clamp(0.0, 1.0)
    }

    /// Draw from the base fit plus independent `N(0, γ²)` noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let base = self.base.sample(rng, count);
        if self.gamma_sq == 0.0 {
            return base;
        }
        let noise = Normal::new(0.0, self.gamma()).expect("finite positive sd");
        base.into_iter().map(|y| y + noise.sample(rng)).collect()
    }
}

fn piece_pdf(s: f64, delta: f64, a: f64, b: f64, x: f64, g: f64) -> f64 {
    let beta = (b - a) / delta;
    let kappa = beta * g;
    let t0 = (x - s) / g;
    let t1 = (x - s - delta) / g;
    let li = log_norm_interval(t1 + kappa, t0 + kappa);
    if li == f64::NEG_INFINITY {
        return 0.0;
    }
    (a + beta * (x - s) + 0.5 * kappa * kappa + li).exp()
}

fn piece_cdf(s: f64, delta: f64, a: f64, b: f64, x: f64, g: f64) -> f64 {
    let t0 = (x - s) / g;
    let t1 = (x - s - delta) / g;
    if t1 > SATURATE {
        return segment(a, b, delta).j;
    }
    if t0 < -SATURATE {
        return 0.0;
    }
    let beta = (b - a) / delta;
    if (beta * delta).abs() >= 1e-4 {
        let pdf = piece_pdf(s, delta, a, b, x, g);
        return (b.exp() * norm_cdf(t1) - a.exp() * norm_cdf(t0) + pdf) / beta;
    }
    // e^{βv} ≈ 1 + βv + β²v²/2 with v = (x − s) − γt
    let big_x = x - s;
    let anti = |t: f64| {
        let (p, d) = (norm_cdf(t), norm_pdf(t));
        [
            t * p + d,
            0.5 * (t * t - 1.0) * p + 0.5 * t * d,
            (t * t * t * p + (t * t + 2.0) * d) / 3.0,
        ]
    };
    let (u, l) = (anti(t0), anti(t1));
    let m = [u[0] - l[0], u[1] - l[1], u[2] - l[2]];
    let c0 = 1.0 + beta * big_x + 0.5 * beta * beta * big_x * big_x;
    let c1 = -beta * g * (1.0 + beta * big_x);
    let c2 = 0.5 * beta * beta * g * g;
    a.exp() * g * (c0 * m[0] + c1 * m[1] + c2 * m[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logconcave::{lc_fit, DEFAULT_TOL};
    use crate::quad::integrate_with_breaks;
    use rand::SeedableRng;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_point_gamma() {
        let s = sample(&[0.0, 1.0]);
        let f = lc_smooth(&lc_fit(&s, DEFAULT_TOL).unwrap(), &s).unwrap();
        assert!((f.gamma_sq() - 1.0 / 6.0).abs() < 1e-10);
        assert!((f.variance() - 0.25).abs() < 1e-10);
    }

    fn fitted(seed: u64, n: usize) -> (Sample, SmoothedLogConcaveFit) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 + rng.random::<f64>()).collect();
        let s = sample(&v);
        let f = lc_smooth(&lc_fit(&s, DEFAULT_TOL).unwrap(), &s).unwrap();
        (s, f)
    }

    #[test]
    fn variance_matches_sample() {
        for seed in 0..5 {
            let (s, f) = fitted(seed, 60);
            assert!((f.variance() - s.variance_pop()).abs() < 1e-8);
        }
    }

    #[test]
    fn mass_and_cdf_against_quadrature() {
        let (_, f) = fitted(1, 80);
        let (lo, hi) = f.effective_support();
        let brk = f.base().active_knots().to_vec();
        let mass = integrate_with_breaks(|x| f.pdf(x), lo, hi, &brk, 1e-11);
        assert!((mass - 1.0).abs() < 1e-7);
        for x in [-0.5, 0.2, 1.0, 1.7, 2.9, 3.5] {
            let c = integrate_with_breaks(|t| f.pdf(t), lo, x, &brk, 1e-11);
            assert!((c - f.cdf(x)).abs() < 1e-8, "x={x}: {c} vs {}", f.cdf(x));
        }
    }

    #[test]
    fn flat_and_steep_pieces() {
        // exercises both CDF branches and both tails
        let base = LogConcaveFit::from_knots(vec![0.0, 1.0, 2.0, 2.5], vec![0.0, 1e-7, -3.0, -9.0]).unwrap();
        for gs in [1e-6, 0.01, 0.5, 4.0] {
            let f = SmoothedLogConcaveFit::new(base.clone(), gs).unwrap();
            let (lo, _) = f.effective_support();
            for x in [-1.0, 0.0, 0.3, 1.0, 1.9, 2.5, 3.0] {
                let c = integrate_with_breaks(|t| f.pdf(t), lo, x, &[0.0, 1.0, 2.0, 2.5], 1e-12);
                assert!((c - f.cdf(x)).abs() < 1e-9, "gs={gs} x={x}");
            }
        }
    }

    #[test]
    fn zero_gamma_is_base() {
        let base = LogConcaveFit::from_knots(vec![0.0, 1.0], vec![0.0, -1.0]).unwrap();
        let f = SmoothedLogConcaveFit::new(base.clone(), 0.0).unwrap();
        assert_eq!(f.cdf(0.4), base.cdf(0.4));
        assert_eq!(f.pdf(0.4), base.pdf(0.4));
    }
}
