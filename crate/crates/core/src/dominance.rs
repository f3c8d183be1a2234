//! Two-sample tests of non-dominance against stochastic dominance.
//!
//! The null is that `F₁(x) ≥ F₂(x)` somewhere on the trimmed interval `D`;
//! large values of each statistic are evidence that `F₂ > F₁` throughout
//! `D`, i.e. that the first sample dominates the second.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::density::{DistributionHandle, Family, FitOptions, Model};
use crate::empirical::{Ecdf, Sample, TrimInterval};
use crate::error::{Error, Result};
use crate::quad::integrate_with_breaks;
use crate::special::{norm_cdf, norm_quantile};

/// Uniform points added to the data candidates for continuous fits.
const MIN_T_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    MinT,
    Tsep,
    Wrs,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::MinT => "min-t",
            Statistic::Tsep => "tsep",
            Statistic::Wrs => "wrs",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "min-t" => Statistic::MinT,
            "tsep" => Statistic::Tsep,
            "wrs" => Statistic::Wrs,
            _ => return Err(Error::invalid(format!("unknown statistic '{s}'"))),
        })
    }
}

/// Standardized gap at one point; `None` where both variances vanish and
/// the CDFs agree.
fn t_ratio(f1: f64, f2: f64, m: f64, n: f64) -> Option<f64> {
    let num = f2 - f1;
    let var = f1 * (1.0 - f1) / m + f2 * (1.0 - f2) / n;
    if var > 0.0 {
        Some(num / var.sqrt())
    } else if num > 0.0 {
        Some(f64::INFINITY)
    } else if num < 0.0 {
        Some(f64::NEG_INFINITY)
    } else {
        None
    }
}

/// `inf_{x ∈ D} (F₂ − F₁)/√(F₁(1−F₁)/m + F₂(1−F₂)/n)`. Points where both
/// variances vanish count as `±∞` by the sign of the gap, or are skipped
/// when the gap is zero; the value is 0 if every point is skipped.
pub fn stat_min_t(f1: &DistributionHandle, f2: &DistributionHandle, d: &TrimInterval) -> f64 {
    let (m, n) = (f1.sample_size() as f64, f2.sample_size() as f64);
    let eval = |x: f64| t_ratio(f1.cdf(x), f2.cdf(x), m, n);

    let mut cand: Vec<f64> = f1
        .points()
        .iter()
        .chain(f2.points())
        .copied()
        .filter(|&x| d.contains(x))
        .collect();
    cand.push(d.lower);
    cand.push(d.upper);
    let continuous = f1.has_density() || f2.has_density();
    if continuous && d.upper > d.lower {
        let step = (d.upper - d.lower) / (MIN_T_GRID - 1) as f64;
        cand.extend((0..MIN_T_GRID).map(|i| d.lower + step * i as f64));
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();

    let mut best = f64::INFINITY;
    let mut best_idx = None;
    let mut seen = false;
    for (i, &x) in cand.iter().enumerate() {
        if let Some(v) = eval(x) {
            seen = true;
            if v < best {
                best = v;
                best_idx = Some(i);
            }
        }
    }
    if !seen {
        return 0.0;
    }
    if continuous && best.is_finite() {
        let i = best_idx.unwrap();
        let a = cand[i.saturating_sub(1)];
        let b = cand[(i + 1).min(cand.len() - 1)];
        let tol = 1e-6 * (d.upper - d.lower).max(f64::MIN_POSITIVE);
        let obj = |x: f64| eval(x).unwrap_or(f64::INFINITY);
        best = best.min(golden(&obj, a, b, tol));
    }
    best
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.min(fd);
    while b - a > tol {
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
        best = best.min(fc).min(fd);
    }
    best
}

/// Two-sample empirical process statistic
/// `√(mn/N) · inf_{z ∈ [p, 1−p]} (F₂ − F₁)(ℍ⁻¹(z)) / √(z(1−z))`.
///
/// `ℍ⁻¹` is constant on each `(C_{k−1}/N, C_k/N]`, so the infimum over a
/// piece with gap `c` sits at the end farthest from 1/2 when `c < 0` and
/// at the point closest to 1/2 when `c > 0`.
pub fn stat_tsep(f1: &DistributionHandle, f2: &DistributionHandle, pooled: &Ecdf, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::invalid(format!("p must lie in (0, 1/2), got {p}")));
    }
    let big_n = pooled.sample_size() as f64;
    let (m, n) = (f1.sample_size() as f64, f2.sample_size() as f64);
    let levels = pooled.cum_probs();
    let mut best = f64::INFINITY;
    let mut prev = 0.0;
    for (&x, &level) in pooled.support().iter().zip(&levels) {
        let (left, right) = (prev, level);
        prev = level;
        let lo = left.max(p);
        let hi = right.min(1.0 - p);
        if lo > hi || (lo == hi && lo <= left) {
            continue;
        }
        let c = f2.cdf(x) - f1.cdf(x);
        let z = if c < 0.0 {
            if lo * (1.0 - lo) < hi * (1.0 - hi) {
                lo
            } else {
                hi
            }
        } else {
            0.5f64.clamp(lo, hi)
        };
        let v = if c == 0.0 { 0.0 } else { c / (z * (1.0 - z)).sqrt() };
        best = best.min(v);
    }
    if !best.is_finite() {
        return Ok(0.0);
    }
    Ok((m * n / big_n).sqrt() * best)
}

/// `√(12mn/(N+1)) · (∫F₂ dF₁ − 1/2)`. Empirical inputs use midranks for
/// ties; fitted densities use adaptive quadrature.
pub fn stat_wrs(f1: &DistributionHandle, f2: &DistributionHandle) -> Result<f64> {
    let (m, n) = (f1.sample_size() as f64, f2.sample_size() as f64);
    let integral = match f1.model() {
        Model::Empirical(e1) => {
            let mut acc = 0.0;
            let mut prev = 0.0;
            for (&x, c) in e1.support().iter().zip(e1.cum_probs()) {
                let w = c - prev;
                prev = c;
                let below = left_limit(f2, x);
                acc += w * (below + 0.5 * (f2.cdf(x) - below));
            }
            acc
        }
        _ => {
            let (lo, hi) = f1.range();
            let mut breaks = f1.breakpoints();
            breaks.extend(f2.breakpoints());
            integrate_with_breaks(|x| f2.cdf(x) * f1.pdf(x), lo, hi, &breaks, 1e-8)
        }
    };
    Ok((12.0 * m * n / (m + n + 1.0)).sqrt() * (integral - 0.5))
}

fn left_limit(f: &DistributionHandle, x: f64) -> f64 {
    match f.model() {
        Model::Empirical(e) => e.eval_left(x),
        _ => f.cdf(x),
    }
}

/// `[λf² + (1−λ)g²] / [λf + (1−λ)g]²`.
pub fn sigma_tsep(f_at: f64, g_at: f64, lambda: f64) -> Result<f64> {
    if !(f_at > 0.0 && g_at > 0.0) {
        return Err(Error::invalid("density values must be positive"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    // equal to the ratio above, written so that f = g gives exactly 1
    let den = lambda * f_at + (1.0 - lambda) * g_at;
    let gap = (f_at - g_at) / den;
    Ok(1.0 + lambda * (1.0 - lambda) * gap * gap)
}

/// `max{√(N/m), √(N/n)}`.
pub fn c_mn(m: usize, n: usize) -> f64 {
    let big_n = (m + n) as f64;
    (big_n / m as f64).sqrt().max((big_n / n as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct DominanceConfig {
    pub family: Family,
    pub statistic: Statistic,
    pub p: f64,
    pub alpha: f64,
    pub conservative: bool,
    /// Replaces the pooled-quantile interval when set.
    pub interval: Option<(f64, f64)>,
    pub fit: FitOptions,
}

impl DominanceConfig {
    pub fn new(family: Family, statistic: Statistic) -> Self {
        DominanceConfig {
            family,
            statistic,
            p: 0.05,
            alpha: 0.05,
            conservative: false,
            interval: None,
            fit: FitOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(Error::invalid(format!("p must lie in (0, 1/2), got {}", self.p)));
        }
        if self.conservative && self.statistic != Statistic::Tsep {
            return Err(Error::invalid("the conservative critical value applies to tsep only"));
        }
        if self.family == Family::Kde {
            return Err(Error::invalid("dominance tests support empirical, unimodal, logconcave and logconcave-smoothed families"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceTestResult {
    pub statistic: Statistic,
    pub value: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub p: f64,
    pub interval: TrimInterval,
    pub family: Family,
    pub conservative: bool,
    pub c_mn: f64,
    pub lambda_hat: f64,
    /// Set when no limiting distribution is known for this combination.
    pub asymptotics_unknown: bool,
}

/// Fits both samples, evaluates the statistic and compares it with `z_α`,
/// or with `C_{m,n} z_α` for the conservative TSEP test. The p-value uses
/// the matching normal reference, so `p < α` exactly when the test rejects.
pub fn run_dominance_test(x: &Sample, y: &Sample, cfg: &DominanceConfig) -> Result<DominanceTestResult> {
    cfg.validate()?;
    let fit_opts = FitOptions {
        eta: cfg.fit.eta.or(Some(1.0 / (x.len() + y.len()) as f64)),
        ..cfg.fit
    };
    let f1 = DistributionHandle::fit(x, cfg.family, &fit_opts).map_err(|e| e.context("fitting the first sample"))?;
    let f2 = DistributionHandle::fit(y, cfg.family, &fit_opts).map_err(|e| e.context("fitting the second sample"))?;
    test_with_handles(&f1, &f2, x, y, cfg)
}

/// Runs the test on already fitted distributions.
pub fn test_with_handles(
    f1: &DistributionHandle,
    f2: &DistributionHandle,
    x: &Sample,
    y: &Sample,
    cfg: &DominanceConfig,
) -> Result<DominanceTestResult> {
    cfg.validate()?;
    let pooled = Ecdf::pooled(x, y);
    let interval = match cfg.interval {
        Some((lo, hi)) => TrimInterval::custom(lo, hi)?,
        None => TrimInterval::from_pooled(&pooled, cfg.p)?,
    };
    let value = match cfg.statistic {
        Statistic::MinT => stat_min_t(f1, f2, &interval),
        Statistic::Tsep => stat_tsep(f1, f2, &pooled, cfg.p)?,
        Statistic::Wrs => stat_wrs(f1, f2)?,
    };
    if value.is_nan() {
        return Err(Error::Numerical(format!("{} statistic is NaN", cfg.statistic)));
    }
    let (m, n) = (x.len(), y.len());
    let cmn = c_mn(m, n);
    let z = norm_quantile(1.0 - cfg.alpha)?;
    let scale = if cfg.conservative { cmn } else { 1.0 };
    let p_value = if value == f64::INFINITY {
        0.0
    } else if value == f64::NEG_INFINITY {
        1.0
    } else {
        1.0 - norm_cdf(value / scale)
    };
    Ok(DominanceTestResult {
        statistic: cfg.statistic,
        value,
        critical_value: scale * z,
        p_value,
        reject: value > scale * z,
        p: cfg.p,
        interval,
        family: cfg.family,
        conservative: cfg.conservative,
        c_mn: cmn,
        lambda_hat: m as f64 / (m + n) as f64,
        asymptotics_unknown: cfg.statistic == Statistic::Wrs
            && matches!(cfg.family, Family::Logconcave | Family::LogconcaveSmoothed),
    })
}
