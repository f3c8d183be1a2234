//! Gaussian kernel density estimation with least-squares cross-validation
//! and two-stage plug-in bandwidths.

use serde::Serialize;

use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::special::{norm_cdf, SQRT_2PI};

/// Kernel contributions beyond this many bandwidths are below 1e-31.
const CUTOFF: f64 = 12.0;

const LSCV_GRID: usize = 61;
const LSCV_LO: f64 = 0.05;
const LSCV_HI: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Lscv,
    PlugIn,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct KdeFit {
    #[serde(skip)]
    points: Vec<f64>,
    bandwidth: f64,
}

impl KdeFit {
    pub fn new(sample: &Sample, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KdeFit {
            points: sample.values().to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Interval holding all but a negligible fraction of the mass.
    pub fn effective_support(&self) -> (f64, f64) {
        let pad = 8.0 * self.bandwidth;
        (self.points[0] - pad, self.points[self.points.len() - 1] + pad)
    }

    fn window(&self, x: f64) -> (usize, usize) {
        let r = CUTOFF * self.bandwidth;
        (
            self.points.partition_point(|&p| p < x - r),
            self.points.partition_point(|&p| p <= x + r),
        )
    }

    /// Sums kernels within the cutoff; far from every point, where that sum
    /// would be empty, all kernels are summed so the density stays positive
    /// until it underflows.
    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let (mut lo, mut hi) = self.window(x);
        if lo == hi {
            (lo, hi) = (0, self.points.len());
        }
        let s: f64 = self.points[lo..hi]
            .iter()
            .map(|p| {
                let z = (x - p) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        s / (self.points.len() as f64 * h * SQRT_2PI)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let (lo, hi) = self.window(x);
        let s: f64 = self.points[lo..hi].iter().map(|p| norm_cdf((x - p) / h)).sum();
        ((lo as f64 + s) / self.points.len() as f64).min(1.0)
    }

    /// `∫ f̂²`, exact.
    pub fn integral_sq(&self) -> f64 {
        let n = self.points.len() as f64;
        let h = self.bandwidth;
        let mut s = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = (a - b) / h;
                s += (-0.25 * d * d).exp();
            }
        }
        (n + 2.0 * s) / (n * n * 2.0 * h * std::f64::consts::PI.sqrt())
    }
}

pub fn kde_fit(sample: &Sample, bandwidth: Bandwidth) -> Result<KdeFit> {
    let h = match bandwidth {
        Bandwidth::Lscv => lscv_bandwidth(sample)?,
        Bandwidth::PlugIn => plugin_bandwidth(sample)?,
        Bandwidth::Fixed(h) => h,
    };
    KdeFit::new(sample, h)
}

/// Squared pairwise distances, sorted, for repeated LSCV evaluation.
pub struct LscvScore {
    d2: Vec<f64>,
    n: usize,
}

impl LscvScore {
    pub fn new(sample: &Sample) -> Self {
        let v = sample.values();
        let mut d2 = Vec::with_capacity(v.len() * (v.len() - 1) / 2);
        for (i, a) in v.iter().enumerate() {
            for b in &v[i + 1..] {
                d2.push((a - b) * (a - b));
            }
        }
        d2.sort_by(f64::total_cmp);
        LscvScore { d2, n: v.len() }
    }

    /// `∫ f̂ₕ² − (2/n) Σᵢ f̂ₕ,₋ᵢ(Xᵢ)`.
    pub fn score(&self, h: f64) -> f64 {
        let n = self.n as f64;
        let inv4h2 = 0.25 / (h * h);
        // pairs with d²/(4h²) > 745 underflow to zero
        let end = self.d2.partition_point(|&d| d * inv4h2 < 745.0);
        let (mut s4, mut s2) = (0.0, 0.0);
        for &d in &self.d2[..end] {
            let e = (-d * inv4h2).exp();
            s4 += e;
            s2 += e * e;
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let int_sq = (n + 2.0 * s4) / (n * n * 2.0 * h * sqrt_pi);
        let loo = 2.0 * s2 / ((n - 1.0) * h * SQRT_2PI) / n;
        int_sq - 2.0 * loo
    }
}

fn spread(sample: &Sample) -> Result<f64> {
    let sd = sample.sd();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("bandwidth selection needs a sample with nonzero spread".into()));
    }
    Ok(sd)
}

/// LSCV bandwidth: best of 61 log-spaced values in
/// `[0.05, 5]·σ̂·n^{-1/5}`, refined by golden-section search between the
/// neighbours of the best grid value.
pub fn lscv_bandwidth(sample: &Sample) -> Result<f64> {
    if sample.len() < 3 {
        return Err(Error::invalid("LSCV needs at least three observations"));
    }
    let sd = spread(sample)?;
    if sample.has_ties() {
        log::warn!("tied observations can drive the LSCV bandwidth to the lower search bound");
    }
    let scale = sd * (sample.len() as f64).powf(-0.2);
    let (lo, hi) = ((LSCV_LO * scale).ln(), (LSCV_HI * scale).ln());
    let step = (hi - lo) / (LSCV_GRID - 1) as f64;
    let obj = LscvScore::new(sample);
    let score = |lh: f64| obj.score(lh.exp());

    let grid: Vec<f64> = (0..LSCV_GRID).map(|i| score(lo + step * i as f64)).collect();
    let best = grid
        .iter()
        .enumerate()
        .fold(0, |b, (i, &s)| if s < grid[b] { i } else { b });
    let (a, b) = (
        lo + step * best.saturating_sub(1) as f64,
        lo + step * (best + 1).min(LSCV_GRID - 1) as f64,
    );
    let (lh, s) = golden_min(&score, a, b, 1e-10);
    if s < grid[best] {
        Ok(lh.exp())
    } else {
        Ok((lo + step * best as f64).exp())
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `ψ̂ᵣ(g) = n⁻² g^{-r-1} Σᵢ Σⱼ φ⁽ʳ⁾((Xᵢ − Xⱼ)/g)` for `r = 4, 6`.
fn psi_hat(v: &[f64], g: f64, r: u32) -> f64 {
    let n = v.len() as f64;
    let herm = |z: f64| {
        let z2 = z * z;
        match r {
            4 => (z2 - 6.0) * z2 + 3.0,
            6 => ((z2 - 15.0) * z2 + 45.0) * z2 - 15.0,
            _ => unreachable!(),
        }
    };
    let mut s = 0.0;
    for (i, a) in v.iter().enumerate() {
        for b in &v[i + 1..] {
            let z = (a - b) / g;
            if z.abs() > 40.0 {
                continue;
            }
            s += herm(z) * (-0.5 * z * z).exp();
        }
    }
    let total = 2.0 * s + n * herm(0.0);
    total / (SQRT_2PI * n * n * g.powi(r as i32 + 1))
}

/// Two-stage direct plug-in bandwidth with one solve-the-equation
/// refinement of the pilot.
///
/// Stage 0 takes `ψ₈` from a normal reference with scale
/// `min(sd, IQR/1.349)`. The pilots are the AMSE-optimal
/// `g₁ = (30/(√(2π) ψ₈ n))^{1/9}` for `ψ₆` and
/// `g₂ = (−6/(√(2π) ψ̂₆ n))^{1/7}` for `ψ₄`, giving
/// `h = (R(K)/(ψ̂₄ n))^{1/5}` with `R(K) = 1/(2√π)`. The refinement
/// re-estimates `ψ₄` at `g = 1.357 (ψ̂₄/−ψ̂₆)^{1/7} h^{5/7}`.
pub fn plugin_bandwidth(sample: &Sample) -> Result<f64> {
    if sample.len() < 4 {
        return Err(Error::invalid("plug-in bandwidth needs at least four observations"));
    }
    let sd = spread(sample)?;
    let v = sample.values();
    let n = v.len() as f64;
    let q = |t: f64| {
        let pos = t * (n - 1.0);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let sigma = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    let sqrt_pi = std::f64::consts::PI.sqrt();

    let psi8 = 105.0 / (32.0 * sqrt_pi * sigma.powi(9));
    let g1 = (30.0 / (SQRT_2PI * psi8 * n)).powf(1.0 / 9.0);
    let psi6 = psi_hat(v, g1, 6);
    if !(psi6 < 0.0) {
        return Err(Error::Numerical(format!("pilot estimate of psi6 is {psi6}, expected negative")));
    }
    let g2 = (-6.0 / (SQRT_2PI * psi6 * n)).powf(1.0 / 7.0);
    let psi4 = psi_hat(v, g2, 4);
    if !(psi4 > 0.0) {
        return Err(Error::Numerical(format!("pilot estimate of psi4 is {psi4}, expected positive")));
    }
    let rk = 0.5 / sqrt_pi;
    let h0 = (rk / (psi4 * n)).powf(0.2);
    let g = 1.357 * (psi4 / -psi6).powf(1.0 / 7.0) * h0.powf(5.0 / 7.0);
    let psi4 = psi_hat(v, g, 4);
    if !(psi4 > 0.0) {
        return Ok(h0);
    }
    Ok((rk / (psi4 * n)).powf(0.2))
}
