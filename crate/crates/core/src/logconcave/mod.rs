//! Log-concave maximum likelihood estimation and the Gaussian-smoothed
//! variant.
//!
//! A fitted log-density is piecewise linear with knots at the distinct
//! observations, so every integral over a piece reduces to
//! `∫₀^δ exp(a + (b − a)s/δ) ds` and its polynomial moments, which
//! [`segment`] evaluates without cancellation for any slope.

mod fit;
mod smooth;

pub use fit::{lc_fit, DEFAULT_TOL, MAX_ITERATIONS};
pub use smooth::{lc_smooth, SmoothedLogConcaveFit};

use rand::distr::Open01;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// `∫₀¹ uᵏ e^{cu} du` for `k = 0, 1, 2`. Accurate for `c ≤ 0` and for
/// `|c| < 1`; callers reflect positive slopes onto `c ≤ 0`.
fn exp_moments(c: f64) -> [f64; 3] {
    if c.abs() < 1.0 {
        let mut out = [0.0; 3];
        let mut term = 1.0; // c^k / k!
        for k in 0..30 {
            let kf = k as f64;
            out[0] += term / (kf + 1.0);
            out[1] += term / (kf + 2.0);
            out[2] += term / (kf + 3.0);
            term *= c / (kf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        out
    } else {
        let e = c.exp();
        [
            (e - 1.0) / c,
            (e * (c - 1.0) + 1.0) / (c * c),
            (e * (c * c - 2.0 * c + 2.0) - 2.0) / (c * c * c),
        ]
    }
}

/// Integral of `exp` of the linear interpolation between `a` and `b` over a
/// piece of width `delta`, with first and second partial derivatives in the
/// end values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub j: f64,
    pub ja: f64,
    pub jb: f64,
    pub jaa: f64,
    pub jab: f64,
    pub jbb: f64,
}

pub(crate) fn segment(a: f64, b: f64, delta: f64) -> Segment {
    if b > a {
        let s = segment(b, a, delta);
        return Segment {
            j: s.j,
            ja: s.jb,
            jb: s.ja,
            jaa: s.jbb,
            jab: s.jab,
            jbb: s.jaa,
        };
    }
    let [i0, i1, i2] = exp_moments(b - a);
    let m = delta * a.exp();
    Segment {
        j: m * i0,
        ja: m * (i0 - i1),
        jb: m * i1,
        jaa: m * (i0 - 2.0 * i1 + i2),
        jab: m * (i1 - i2),
        jbb: m * i2,
    }
}

/// `expm1(z)/z` with its limit at zero.
fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// `ln1p(z)/z` with its limit at zero.
fn ln1p_ratio(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z.ln_1p() / z
    }
}

/// Log-concave density: `exp` of a concave piecewise-linear function on
/// `[first knot, last knot]`, zero elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct LogConcaveFit {
    knots: Vec<f64>,
    phi: Vec<f64>,
    /// Knots where the slope changes, plus both endpoints.
    #[serde(skip)]
    active: Vec<f64>,
    #[serde(skip)]
    active_phi: Vec<f64>,
    /// Mass to the left of each active knot.
    #[serde(skip)]
    cum: Vec<f64>,
    optimality_gap: f64,
    iterations: usize,
}

impl LogConcaveFit {
    /// Builds a fit from log-density values at sorted distinct knots. The
    /// values are shifted so the density integrates to one.
    pub fn from_knots(knots: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        Self::assemble(knots, phi, 0.0, 0)
    }

    pub(crate) fn assemble(knots: Vec<f64>, mut phi: Vec<f64>, gap: f64, iterations: usize) -> Result<Self> {
        if knots.len() < 2 || knots.len() != phi.len() {
            return Err(Error::invalid("log-concave fit needs at least two knots with matching values"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("knots must be strictly increasing"));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite log-density value".into()));
        }
        let total: f64 = (0..knots.len() - 1)
            .map(|i| segment(phi[i], phi[i + 1], knots[i + 1] - knots[i]).j)
            .sum();
        let shift = total.ln();
        phi.iter_mut().for_each(|p| *p -= shift);

        // drop knots where the interpolant is already linear
        let mut active = vec![knots[0]];
        let mut active_phi = vec![phi[0]];
        for i in 1..knots.len() - 1 {
            let left = (phi[i] - phi[i - 1]) / (knots[i] - knots[i - 1]);
            let right = (phi[i + 1] - phi[i]) / (knots[i + 1] - knots[i]);
            if (left - right).abs() > 1e-12 * (1.0 + left.abs().max(right.abs())) {
                active.push(knots[i]);
                active_phi.push(phi[i]);
            }
        }
        active.push(*knots.last().unwrap());
        active_phi.push(*phi.last().unwrap());

        let mut cum = Vec::with_capacity(active.len());
        cum.push(0.0);
        for i in 0..active.len() - 1 {
            let m = segment(active_phi[i], active_phi[i + 1], active[i + 1] - active[i]).j;
            cum.push(cum[i] + m);
        }
        Ok(LogConcaveFit {
            knots,
            phi,
            active,
            active_phi,
            cum,
            optimality_gap: gap,
            iterations,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Log-density at the knots.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Knots at which the log-density bends, including both endpoints.
    pub fn active_knots(&self) -> &[f64] {
        &self.active
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Largest directional derivative of the likelihood objective over
    /// admissible tent perturbations at termination, in units of the data
    /// range.
    pub fn optimality_gap(&self) -> f64 {
        self.optimality_gap
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.active.len() - 1).map(move |i| {
            (
                self.active[i],
                self.active[i + 1],
                self.active_phi[i],
                self.active_phi[i + 1],
            )
        })
    }

    fn piece_index(&self, x: f64) -> usize {
        self.active
            .partition_point(|&k| k <= x)
            .clamp(1, self.active.len() - 1)
            - 1
    }

    /// Log-density, `-∞` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        let i = self.piece_index(x);
        let (x0, x1) = (self.active[i], self.active[i + 1]);
        let (p0, p1) = (self.active_phi[i], self.active_phi[i + 1]);
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let i = self.piece_index(x);
        let (x0, x1) = (self.active[i], self.active[i + 1]);
        let (p0, p1) = (self.active_phi[i], self.active_phi[i + 1]);
        let beta = (p1 - p0) / (x1 - x0);
        let h = x - x0;
        let z = beta * h;
        let part = if z > 1.0 {
            ((p0 + z).exp() - p0.exp()) / beta
        } else {
            p0.exp() * h * expm1_ratio(z)
        };
        (self.cum[i] + part).min(1.0)
    }

    /// Inverse of the CDF.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {t}")));
        }
        Ok(self.quantile_unchecked(t))
    }

    pub(crate) fn quantile_unchecked(&self, t: f64) -> f64 {
        let i = self
            .cum
            .partition_point(|&c| c < t)
            .clamp(1, self.active.len() - 1)
            - 1;
        let (x0, x1) = (self.active[i], self.active[i + 1]);
        let (p0, p1) = (self.active_phi[i], self.active_phi[i + 1]);
        let beta = (p1 - p0) / (x1 - x0);
        let r = (t - self.cum[i]).max(0.0);
        // solve e^{p0}(e^{βh} − 1)/β = r
        let scaled = r * (-p0).exp();
        let z = (beta * scaled).max(-1.0 + 1e-16);
        let h = scaled * ln1p_ratio(z);
        (x0 + h).clamp(x0, x1)
    }

    /// Inverse-CDF draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| self.quantile_unchecked(rng.sample(Open01)))
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.pieces()
            .map(|(x0, x1, p0, p1)| {
                let s = segment(p0, p1, x1 - x0);
                x0 * s.j + (x1 - x0) * s.jb
            })
            .sum()
    }

    /// `∫ (x − c)² f(x) dx`.
    pub fn second_moment_about(&self, c: f64) -> f64 {
        self.pieces()
            .map(|(x0, x1, p0, p1)| {
                let d = x1 - x0;
                let s = segment(p0, p1, d);
                let o = x0 - c;
                o * o * s.j + 2.0 * o * d * s.jb + d * d * s.jbb
            })
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment_about(m)
    }

    /// `∫ f²`.
    pub fn integral_sq(&self) -> f64 {
        self.pieces()
            .map(|(x0, x1, p0, p1)| segment(2.0 * p0, 2.0 * p1, x1 - x0).j)
            .sum()
    }

    /// Mean of the log-density over the observations it was fitted to,
    /// `(1/m) Σ φ(Xᵢ)`.
    pub fn mean_log_likelihood(&self, values: &[f64]) -> f64 {
        values.iter().map(|&x| self.log_pdf(x)).sum::<f64>() / values.len() as f64
    }
}
