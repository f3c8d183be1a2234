//! Piecewise-constant unimodal density estimators.
//!
//! The monotone Grenander estimator is the derivative of the least concave
//! majorant (decreasing case) or greatest convex minorant (increasing case)
//! of the empirical distribution function, computed by pooling adjacent
//! violators among the raw ECDF slopes. The mode-known unimodal MLE
//! glues an increasing fit on `[X₍₁₎, M]` to a decreasing fit on
//! `(M, X₍ₙ₎]`, each carrying the empirical mass of its side. Birgé's
//! estimator picks the mode whose fit is closest to the ECDF in sup norm.
//!
//! When the mode sits on an observation, the mass of that observation is
//! spread over the adjacent piece on its side instead of producing an
//! infinitely tall spike. If the left side then has zero width, its mass is
//! handed to the right side.

use serde::Serialize;

use crate::empirical::{Ecdf, Sample};
use crate::error::{Error, Result};

/// Weighted least-squares nonincreasing fit by pool-adjacent-violators.
pub fn pava_antitonic(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("pava needs at least one value"));
    }
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "pava: {} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::invalid(format!("pava weights must be positive, got {w}")));
    }
    Ok(pava_unchecked(values, weights))
}

fn pava_unchecked(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks: (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m < cur.0 {
                let tw = bw + cur.1;
                cur = ((m * bw + cur.0 * cur.1) / tw, tw, len + cur.2);
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}

/// Piecewise-constant density; `heights[i]` applies on
/// `(breakpoints[i], breakpoints[i + 1]]`.
#[derive(Debug, Clone, Serialize)]
pub struct StepDensity {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
    mode: f64,
    #[serde(skip)]
    cum_mass: Vec<f64>,
}

impl StepDensity {
    pub fn new(breakpoints: Vec<f64>, heights: Vec<f64>, mode: f64) -> Result<Self> {
        if breakpoints.len() < 2 || heights.len() + 1 != breakpoints.len() {
            return Err(Error::invalid("step density needs k + 1 breakpoints for k heights"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("step density breakpoints must increase strictly"));
        }
        if heights.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::invalid("step density heights must be finite and nonnegative"));
        }
        let mut cum_mass = Vec::with_capacity(breakpoints.len());
        cum_mass.push(0.0);
        let mut acc = 0.0;
        for (i, h) in heights.iter().enumerate() {
            acc += h * (breakpoints[i + 1] - breakpoints[i]);
            cum_mass.push(acc);
        }
        Ok(StepDensity {
            breakpoints,
            heights,
            mode,
            cum_mass,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum_mass.last().unwrap()
    }

    /// Density on the half-open piece containing `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x > hi {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b < x);
        self.heights[i - 1]
    }

    /// Right limit of the density at `x`.
    pub fn pdf_right(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x >= hi {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        self.heights[i - 1]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.total_mass();
        }
        let i = self.breakpoints.partition_point(|&b| b <= x) - 1;
        self.cum_mass[i] + self.heights[i] * (x - self.breakpoints[i])
    }

    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {t}")));
        }
        let target = t * self.total_mass();
        let i = self
            .cum_mass
            .partition_point(|&c| c < target)
            .clamp(1, self.heights.len());
        // skip zero-height pieces
        let mut i = i - 1;
        while self.heights[i] == 0.0 && i + 1 < self.heights.len() {
            i += 1;
        }
        let x = self.breakpoints[i] + (target - self.cum_mass[i]) / self.heights[i];
        Ok(x.min(self.breakpoints[i + 1]))
    }

    pub fn mean(&self) -> f64 {
        self.heights
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
                h * (b * b - a * a) / 2.0
            })
            .sum()
    }

    /// `∫ f²`.
    pub fn integral_sq(&self) -> f64 {
        self.heights
            .iter()
            .enumerate()
            .map(|(i, h)| h * h * (self.breakpoints[i + 1] - self.breakpoints[i]))
            .sum()
    }

    /// True when heights rise (weakly) and then fall (weakly).
    pub fn is_unimodal(&self) -> bool {
        let h = &self.heights;
        let mut i = 0;
        while i + 1 < h.len() && h[i] <= h[i + 1] {
            i += 1;
        }
        while i + 1 < h.len() && h[i] >= h[i + 1] {
            i += 1;
        }
        i + 1 == h.len()
    }

    /// Sup-norm distance between this CDF and the ECDF. Between jumps the
    /// ECDF is flat and this CDF is monotone, so the extremes occur at the
    /// jump points, on either side of the jump.
    pub fn ks_distance(&self, ecdf: &Ecdf) -> f64 {
        let n = ecdf.sample_size() as f64;
        let mut prev = 0.0;
        let mut d: f64 = 0.0;
        for (x, c) in ecdf.support().iter().zip(ecdf.cum_probs()) {
            let f = self.cdf(*x);
            d = d.max((f - prev).abs()).max((f - c).abs());
            prev = c;
        }
        let _ = n;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Slopes of the least concave majorant of the points `(t, c)` (`t` strictly
/// increasing). Returns one slope per interval.
fn concave_majorant_slopes(t: &[f64], c: &[f64]) -> Vec<f64> {
    // Pool-adjacent-violators on the raw slopes, with each pooled block's
    // slope taken as the chord over its endpoints rather than a weighted
    // mean, which loses precision when some gaps are tiny.
    let chord = |a: usize, b: usize| (c[b] - c[a]) / (t[b] - t[a]);
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for i in 1..t.len() {
        let mut cur = (i - 1, i, chord(i - 1, i));
        while let Some(&(start, _, slope)) = blocks.last() {
            if slope < cur.2 {
                blocks.pop();
                cur = (start, cur.1, chord(start, cur.1));
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(t.len() - 1);
    for (a, b, slope) in blocks {
        out.extend(std::iter::repeat_n(slope, b - a));
    }
    out
}

/// Slopes of the greatest convex minorant of `(t, c)`.
fn convex_minorant_slopes(t: &[f64], c: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    concave_majorant_slopes(t, &neg).into_iter().map(|s| -s).collect()
}

/// Mode-known unimodal fit on distinct values `v` with cumulative counts
/// `cum` (observations `≤ v[i]`) out of `n`.
fn mode_known_from_counts(v: &[f64], cum: &[usize], n: usize, mode: f64) -> Result<StepDensity> {
    let k = v.len();
    let left_count = v.partition_point(|&x| x <= mode);
    let nf = n as f64;

    let mut breaks: Vec<f64> = Vec::new();
    let mut heights: Vec<f64> = Vec::new();

    // Left side: convex minorant through the left limits, ending at (M, C_L).
    let mut right_start = if left_count > 0 { cum[left_count - 1] } else { 0 };
    if left_count > 0 {
        let mut t = vec![v[0]];
        let mut c = vec![0.0];
        for i in 1..left_count {
            if v[i] < mode {
                t.push(v[i]);
                c.push(cum[i - 1] as f64);
            }
        }
        if mode > v[0] {
            t.push(mode);
            c.push(cum[left_count - 1] as f64);
            let slopes = convex_minorant_slopes(&t, &c);
            breaks.extend_from_slice(&t);
            heights.extend(slopes.iter().map(|s| s / nf));
        } else {
            // zero-width left side: its mass moves to the right piece
            right_start = 0;
        }
    }

    // Right side: concave majorant from (M, start) through (v_i, C_i).
    if left_count < k {
        let mut t = vec![mode];
        let mut c = vec![right_start as f64];
        for i in left_count..k {
            t.push(v[i]);
            c.push(cum[i] as f64);
        }
        let slopes = concave_majorant_slopes(&t, &c);
        if breaks.is_empty() {
            breaks.push(mode);
        }
        breaks.extend_from_slice(&t[1..]);
        heights.extend(slopes.iter().map(|s| s / nf));
    }

    if heights.is_empty() {
        return Err(Error::Degenerate(
            "all observations coincide with the mode; no finite density exists".into(),
        ));
    }
    let (breaks, heights) = merge_equal(breaks, heights);
    StepDensity::new(breaks, heights, mode)
}

fn merge_equal(breaks: Vec<f64>, heights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut b = vec![breaks[0]];
    let mut h: Vec<f64> = Vec::new();
    for (i, &hi) in heights.iter().enumerate() {
        if h.last() == Some(&hi) {
            *b.last_mut().unwrap() = breaks[i + 1];
        } else {
            h.push(hi);
            b.push(breaks[i + 1]);
        }
    }
    (b, h)
}

fn counts(sample: &Sample) -> (Vec<f64>, Vec<usize>) {
    let (v, mult) = sample.distinct();
    let mut acc = 0;
    let cum = mult
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    (v, cum)
}

/// Monotone Grenander estimator anchored at one support endpoint.
///
/// Decreasing fits need `anchor ≤ min(sample)` and are supported on
/// `(anchor, X₍ₙ₎]`; increasing fits need `anchor ≥ max(sample)` and live on
/// `[X₍₁₎, anchor]`.
pub fn grenander_monotone(sample: &Sample, direction: Direction, anchor: f64) -> Result<StepDensity> {
    if !anchor.is_finite() {
        return Err(Error::invalid("anchor must be finite"));
    }
    match direction {
        Direction::Decreasing if anchor > sample.min() => Err(Error::invalid(format!(
            "decreasing fit needs anchor ≤ min(sample) = {}, got {anchor}",
            sample.min()
        ))),
        Direction::Increasing if anchor < sample.max() => Err(Error::invalid(format!(
            "increasing fit needs anchor ≥ max(sample) = {}, got {anchor}",
            sample.max()
        ))),
        _ => {
            let (v, cum) = counts(sample);
            mode_known_from_counts(&v, &cum, sample.len(), anchor)
        }
    }
}

/// Unimodal MLE with known mode: the increasing Grenander fit of the
/// observations `≤ mode` weighted by their sample proportion, followed by the
/// decreasing fit of the observations `> mode`.
pub fn grenander_mode_known(sample: &Sample, mode: f64) -> Result<StepDensity> {
    if !mode.is_finite() {
        return Err(Error::invalid("mode must be finite"));
    }
    let (v, cum) = counts(sample);
    mode_known_from_counts(&v, &cum, sample.len(), mode)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BirgeConfig {
    pub eta: f64,
}

impl BirgeConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(BirgeConfig { eta })
    }
}

/// Outcome of the mode search.
#[derive(Debug, Clone)]
pub struct BirgeFit {
    pub density: StepDensity,
    /// Sup-norm distance of the selected fit to the ECDF.
    pub distance: f64,
    /// Smallest distance over all candidate modes.
    pub best_distance: f64,
    pub eta: f64,
}

/// Birgé's unimodal estimator. Every distinct observation is tried as the
/// mode; the fit with the smallest sup-norm distance to the ECDF is kept,
/// smallest mode first on ties. The selected distance therefore never exceeds
/// the best achievable one plus `eta`.
pub fn birge_fit(sample: &Sample, cfg: BirgeConfig) -> Result<BirgeFit> {
    if sample.n_distinct() < 2 {
        return Err(Error::Degenerate(
            "Birgé's estimator needs at least two distinct observations".into(),
        ));
    }
    let (v, cum) = counts(sample);
    let ecdf = Ecdf::new(sample);
    let mut best: Option<(StepDensity, f64)> = None;
    for &mode in &v {
        let fit = mode_known_from_counts(&v, &cum, sample.len(), mode)?;
        let d = fit.ks_distance(&ecdf);
        let better = match &best {
            None => true,
            Some((_, bd)) => d < *bd - 1e-14,
        };
        if better {
            best = Some((fit, d));
        }
    }
    let (density, distance) = best.expect("at least one candidate");
    Ok(BirgeFit {
        density,
        distance,
        best_distance: distance,
        eta: cfg.eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    /// Exhaustive oracle: minimum squared error over all partitions into
    /// contiguous blocks whose means are nonincreasing.
    fn antitonic_oracle(v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut fit = vec![0.0; n];
            let mut start = 0;
            let mut means = Vec::new();
            for i in 0..n {
                if i == n - 1 || mask & (1 << i) != 0 {
                    let (sw, swv) = (start..=i).fold((0.0, 0.0), |acc, j| (acc.0 + w[j], acc.1 + w[j] * v[j]));
                    let m = swv / sw;
                    means.push(m);
                    for f in fit.iter_mut().take(i + 1).skip(start) {
                        *f = m;
                    }
                    start = i + 1;
                }
            }
            if means.windows(2).any(|p| p[0] < p[1] - 1e-15) {
                continue;
            }
            let sse: f64 = (0..n).map(|j| w[j] * (v[j] - fit[j]).powi(2)).sum();
            if best.as_ref().map_or(true, |(b, _)| sse < *b - 1e-15) {
                best = Some((sse, fit));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn pava_examples() {
        let ones = [1.0; 3];
        assert_eq!(pava_antitonic(&[1.0, 3.0, 2.0], &ones).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(pava_antitonic(&[3.0, 2.0, 1.0], &ones).unwrap(), vec![3.0, 2.0, 1.0]);
        assert_eq!(pava_antitonic(&[3.0, 1.0, 2.0], &ones).unwrap(), vec![3.0, 1.5, 1.5]);
        for (v, w) in [([1.0, 3.0, 2.0], ones), ([3.0, 1.0, 2.0], ones)] {
            let o = antitonic_oracle(&v, &w);
            let p = pava_antitonic(&v, &w).unwrap();
            for (a, b) in o.iter().zip(&p) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pava_errors() {
        assert!(pava_antitonic(&[], &[]).is_err());
        assert!(pava_antitonic(&[1.0], &[0.0]).is_err());
        assert!(pava_antitonic(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn pava_matches_oracle(v in prop::collection::vec(-5.0f64..5.0, 1..9),
                               w in prop::collection::vec(0.1f64..3.0, 9)) {
            let w = &w[..v.len()];
            let p = pava_antitonic(&v, w).unwrap();
            let o = antitonic_oracle(&v, w);
            for (a, b) in p.iter().zip(&o) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!(p.windows(2).all(|x| x[0] >= x[1]));
            prop_assert_eq!(pava_antitonic(&p, w).unwrap(), p);
        }
    }

    #[test]
    fn grenander_decreasing_example() {
        let f = grenander_monotone(&sample(&[1.0, 2.0, 4.0]), Direction::Decreasing, 0.0).unwrap();
        assert_eq!(f.breakpoints(), &[0.0, 2.0, 4.0]);
        assert!((f.heights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.heights()[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grenander_single_point() {
        let c = 3.5;
        let f = grenander_monotone(&sample(&[c]), Direction::Decreasing, c - 1.0).unwrap();
        assert_eq!(f.breakpoints(), &[c - 1.0, c]);
        assert_eq!(f.heights(), &[1.0]);
    }

    #[test]
    fn grenander_wrong_side_anchor() {
        let s = sample(&[1.0, 2.0]);
        assert!(grenander_monotone(&s, Direction::Decreasing, 1.5).is_err());
        assert!(grenander_monotone(&s, Direction::Increasing, 1.5).is_err());
        assert!(grenander_monotone(&s, Direction::Increasing, 2.0).is_ok());
    }

    #[test]
    fn mode_known_examples() {
        let f = grenander_mode_known(&sample(&[-1.0, 1.0]), 0.0).unwrap();
        assert_eq!(f.breakpoints(), &[-1.0, 1.0]);
        assert!((f.heights()[0] - 0.5).abs() < 1e-15);

        let s = sample(&[1.0, 2.0, 4.0]);
        for mode in [0.25, 1.0] {
            let a = grenander_mode_known(&s, mode).unwrap();
            let b = grenander_monotone(&s, Direction::Decreasing, mode).unwrap();
            assert_eq!(a.breakpoints(), b.breakpoints());
            assert_eq!(a.heights(), b.heights());
        }
    }

    #[test]
    fn mode_known_is_unimodal_and_normalized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..60);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0f64).round() * 0.5 + rng.random::<f64>() * 0.01).collect();
            let s = sample(&v);
            let mode = rng.random_range(-4.0..4.0);
            let f = match grenander_mode_known(&s, mode) {
                Ok(f) => f,
                Err(Error::Degenerate(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(f.is_unimodal());
            assert!((f.total_mass() - 1.0).abs() < 1e-10);
            // left pieces rise to the mode, right pieces fall after it
            let bp = f.breakpoints();
            for (i, h) in f.heights().iter().enumerate().skip(1) {
                if bp[i] < mode {
                    assert!(*h >= f.heights()[i - 1] - 1e-12);
                } else if bp[i] > mode {
                    assert!(*h <= f.heights()[i - 1] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mode_known_all_at_mode_is_degenerate() {
        assert!(matches!(
            grenander_mode_known(&sample(&[2.0, 2.0]), 2.0),
            Err(Error::Degenerate(_))
        ));
    }

    /// Brute-force sup distance over every candidate mode.
    fn best_mode_distance(s: &Sample) -> f64 {
        let e = Ecdf::new(s);
        let (v, _) = s.distinct();
        v.iter()
            .map(|&m| grenander_mode_known(s, m).unwrap().ks_distance(&e))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn birge_examples() {
        let s = sample(&[-1.0, 1.0]);
        let fit = birge_fit(&s, BirgeConfig::new(0.5).unwrap()).unwrap();
        assert_eq!(fit.density.breakpoints(), &[-1.0, 1.0]);
        assert!((fit.density.heights()[0] - 0.5).abs() < 1e-15);

        let s = sample(&[0.1, 0.2, 0.4, 0.9]);
        let fit = birge_fit(&s, BirgeConfig::new(0.25).unwrap()).unwrap();
        let best = best_mode_distance(&s);
        assert!(fit.distance <= best + 0.25);
        if fit.density.mode() <= s.min() {
            let dec = grenander_monotone(&s, Direction::Decreasing, fit.density.mode()).unwrap();
            assert_eq!(dec.heights(), fit.density.heights());
        }
    }

    #[test]
    fn birge_direction_property_at_data_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(5..80);
            let v: Vec<f64> = (0..n)
                .map(|_| rng.random::<f64>() + rng.random::<f64>())
                .collect();
            let s = sample(&v);
            let fit = birge_fit(&s, BirgeConfig::new(1.0 / n as f64).unwrap()).unwrap();
            let e = Ecdf::new(&s);
            let m = fit.density.mode();
            for &x in e.support() {
                let f = fit.density.cdf(x);
                if x < m {
                    assert!(f <= e.eval(x) + 1e-12);
                } else {
                    assert!(f >= e.eval(x) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn birge_rejects_single_value() {
        assert!(birge_fit(&sample(&[1.0, 1.0]), BirgeConfig::new(0.1).unwrap()).is_err());
        assert!(BirgeConfig::new(0.0).is_err());
    }

    #[test]
    fn step_density_queries() {
        let f = StepDensity::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.25], 0.5).unwrap();
        assert_eq!(f.pdf(1.0), 0.5);
        assert_eq!(f.pdf_right(1.0), 0.25);
        assert_eq!(f.pdf(0.0), 0.0);
        assert!((f.cdf(2.0) - 0.75).abs() < 1e-15);
        assert!((f.quantile(0.75).unwrap() - 2.0).abs() < 1e-15);
        assert!((f.mean() - (0.25 + 0.25 * 4.0)).abs() < 1e-15);
    }
}
