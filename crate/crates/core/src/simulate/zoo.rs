//! Distributions used by the Monte Carlo studies.
//!
//! Gamma is `(shape, scale)`, the exponential is rate-parametrized, and
//! `Pareto { shape: a, scale: b }` has CDF `1 − (b/x)^a` for `x ≥ b`.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::logconcave::SmoothedLogConcaveFit;
use crate::quad::integrate_with_breaks;
use crate::special::{gamma_p, ln_gamma, norm_cdf, norm_pdf};

#[derive(Debug, Clone)]
pub enum Dist {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
    Exponential { rate: f64 },
    Pareto { shape: f64, scale: f64 },
    /// Weighted components; weights sum to one.
    Mixture(Vec<(f64, Dist)>),
    Smoothed(Box<SmoothedLogConcaveFit>),
}

impl Dist {
    pub fn normal(mean: f64, sd: f64) -> Dist {
        Dist::Normal { mean, sd }
    }

    pub fn gamma(shape: f64, scale: f64) -> Dist {
        Dist::Gamma { shape, scale }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dist::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Dist::Gamma { shape, scale } => Gamma::new(*shape, *scale).expect("valid gamma parameters").sample(rng),
            Dist::Exponential { rate } => {
                let u: f64 = rng.sample(Open01);
                -u.ln() / rate
            }
            Dist::Pareto { shape, scale } => {
                let u: f64 = rng.sample(Open01);
                scale * u.powf(-1.0 / shape)
            }
            Dist::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, d) in parts {
                    acc += w;
                    if u < acc {
                        return d.sample_one(rng);
                    }
                }
                // rounding left u above the accumulated weight
                let (_, d) = parts.iter().rev().find(|(w, _)| *w > 0.0).expect("a positive weight");
                d.sample_one(rng)
            }
            Dist::Smoothed(f) => f.sample(rng, 1)[0],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Dist::Normal { mean, sd } => norm_pdf((x - mean) / sd) / sd,
            Dist::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                ((shape - 1.0) * x.ln() - x / scale - ln_gamma(*shape) - shape * scale.ln()).exp()
            }
            Dist::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Dist::Pareto { shape, scale } => {
                if x < *scale {
                    0.0
                } else {
                    shape / scale * (scale / x).powf(shape + 1.0)
                }
            }
            Dist::Mixture(parts) => parts.iter().map(|(w, d)| w * d.pdf(x)).sum(),
            Dist::Smoothed(f) => f.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Dist::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Dist::Gamma { shape, scale } => gamma_p(*shape, x / scale),
            Dist::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Dist::Pareto { shape, scale } => {
                if x <= *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*shape)
                }
            }
            Dist::Mixture(parts) => parts.iter().map(|(w, d)| w * d.cdf(x)).sum(),
            Dist::Smoothed(f) => f.cdf(x),
        }
    }

    /// `None` when the mean is infinite.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Dist::Normal { mean, .. } => Some(*mean),
            Dist::Gamma { shape, scale } => Some(shape * scale),
            Dist::Exponential { rate } => Some(1.0 / rate),
            Dist::Pareto { shape, scale } => (*shape > 1.0).then(|| shape * scale / (shape - 1.0)),
            Dist::Mixture(parts) => parts.iter().map(|(w, d)| d.mean().map(|m| w * m)).sum(),
            Dist::Smoothed(f) => Some(f.mean()),
        }
    }

    /// `None` when the variance is infinite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            Dist::Normal { sd, .. } => Some(sd * sd),
            Dist::Gamma { shape, scale } => Some(shape * scale * scale),
            Dist::Exponential { rate } => Some(1.0 / (rate * rate)),
            Dist::Pareto { shape: a, scale: b } => (*a > 2.0).then(|| b * b * a / ((a - 1.0).powi(2) * (a - 2.0))),
            Dist::Mixture(parts) => {
                let mean = self.mean()?;
                let second: Option<f64> = parts
                    .iter()
                    .map(|(w, d)| Some(w * (d.variance()? + d.mean()?.powi(2))))
                    .sum();
                Some(second? - mean * mean)
            }
            Dist::Smoothed(f) => Some(f.variance()),
        }
    }

    /// Interval holding every point where `√pdf` is above double precision,
    /// and the points where the density is not smooth.
    fn quadrature_domain(&self) -> (f64, f64, Vec<f64>) {
        match self {
            Dist::Normal { mean, sd } => (mean - 40.0 * sd, mean + 40.0 * sd, vec![]),
            Dist::Gamma { shape, scale } => (0.0, scale * (shape + 200.0), vec![0.0]),
            Dist::Exponential { rate } => (0.0, 200.0 / rate, vec![0.0]),
            Dist::Pareto { scale, .. } => (*scale, scale * 1e12, vec![*scale]),
            Dist::Mixture(parts) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut breaks = Vec::new();
                for (_, d) in parts {
                    let (l, h, b) = d.quadrature_domain();
                    lo = lo.min(l);
                    hi = hi.max(h);
                    breaks.extend(b);
                }
                (lo, hi, breaks)
            }
            Dist::Smoothed(f) => {
                let (lo, hi) = f.effective_support();
                (lo, hi, f.base().active_knots().to_vec())
            }
        }
    }
}

/// `1 − ∫√(fg)` by adaptive quadrature.
pub fn hellinger_sq_quadrature(f: &Dist, g: &Dist) -> f64 {
    let (la, ha, mut breaks) = f.quadrature_domain();
    let (lb, hb, b2) = g.quadrature_domain();
    breaks.extend(b2);
    // both densities are needed, so the overlap suffices
    let (lo, hi) = (la.max(lb), ha.min(hb));
    if !(hi > lo) {
        return 1.0;
    }
    // the bulk of the mass sits near the means; splitting there keeps the
    // adaptive rule from missing narrow peaks on a wide domain
    for d in [f, g] {
        if let (Some(m), Some(v)) = (d.mean(), d.variance()) {
            let s = v.sqrt();
            breaks.extend((-8..=8).map(|k| m + 0.5 * k as f64 * s));
        }
    }
    let aff = integrate_with_breaks(|x| (f.pdf(x) * g.pdf(x)).sqrt(), lo, hi, &breaks, 1e-13);
    (1.0 - aff).clamp(0.0, 1.0)
}

macro_rules! case_enum {
    ($name:ident, $what:literal, [$($v:ident => $s:literal),+]) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($v),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$v),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$v => $s),+ }
            }

            pub(crate) fn index(self) -> u64 {
                Self::ALL.iter().position(|&c| c == self).unwrap() as u64
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok($name::$v),)+
                    _ => Err(Error::invalid(format!(concat!("unknown ", $what, " case '{}'"), s))),
                }
            }
        }
    };
}

case_enum!(DominanceCase, "dominance", [A => "a", B => "b", C => "c", D => "d", E => "e"]);
case_enum!(HellingerCase, "Hellinger", [A => "a", B => "b", C => "c", D => "d", E => "e", F => "f"]);

/// `(F, G)` for a dominance scenario at `γ ∈ [0, 1]`; `X ~ F`, `Y ~ G`.
pub fn dominance_pair(case: DominanceCase, gamma: f64) -> Result<(Dist, Dist)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(match case {
        DominanceCase::A => (Dist::normal(gamma, 1.0), Dist::normal(0.0, 1.0)),
        DominanceCase::B => (Dist::normal(3.0 * gamma, 1.0), Dist::normal(0.5, 2.0)),
        DominanceCase::C => (Dist::gamma(2.0, 0.1 + 0.4 * gamma), Dist::gamma(1.0, 0.5)),
        DominanceCase::D => (
            Dist::gamma(2.0, 1.0),
            Dist::Pareto {
                shape: 0.5 + 2.0 * gamma,
                scale: 1.0,
            },
        ),
        DominanceCase::E => (
            Dist::normal(0.0, 1.0),
            Dist::Mixture(vec![
                (0.5, Dist::normal(2.0 * gamma + 4.0, 1.0)),
                (0.5, Dist::normal(2.0 * gamma - 2.0, 1.0)),
            ]),
        ),
    })
}

/// `(F, G)` for a Hellinger scenario. Case `c` is built from smoothed
/// log-concave fits supplied by the caller.
pub fn hellinger_pair(case: HellingerCase, reference: Option<(&SmoothedLogConcaveFit, &SmoothedLogConcaveFit)>) -> Result<(Dist, Dist)> {
    Ok(match case {
        HellingerCase::A => (Dist::gamma(4.0, 1.0), Dist::gamma(3.0, 1.0)),
        HellingerCase::B => (Dist::normal(1.0, 1.0), Dist::normal(0.0, 1.0)),
        HellingerCase::C => {
            let (f, g) = reference.ok_or_else(|| Error::invalid("Hellinger case c needs two reference samples"))?;
            (Dist::Smoothed(Box::new(f.clone())), Dist::Smoothed(Box::new(g.clone())))
        }
        HellingerCase::D => (Dist::Exponential { rate: 1.0 }, Dist::Exponential { rate: 2.0 }),
        HellingerCase::E => dominance_pair(DominanceCase::E, 1.0)?,
        HellingerCase::F => (Dist::normal(0.0, 1.0), Dist::gamma(3.61, 1.41)),
    })
}

/// Closed-form `ℋ²` where one exists.
pub fn hellinger_truth_closed_form(case: HellingerCase) -> Option<f64> {
    match case {
        HellingerCase::A => Some(1.0 - (ln_gamma(3.5) - 0.5 * 12f64.ln()).exp()),
        HellingerCase::B => Some(-(-0.125f64).exp_m1()),
        HellingerCase::D => Some(1.0 - 2f64.sqrt() / 1.5),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments_match(d: &Dist, seed: u64) {
        const N: usize = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = d.sample(&mut rng, N);
        let n = N as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let (mu, var) = (d.mean().unwrap(), d.variance().unwrap());
        let se_mean = (var / n).sqrt();
        let se_var = ((m4 - m2 * m2) / n).sqrt();
        assert!((mean - mu).abs() < 5.0 * se_mean, "{d:?}: mean {mean} vs {mu}");
        assert!((m2 - var).abs() < 5.0 * se_var, "{d:?}: variance {m2} vs {var}");
    }

    #[test]
    fn zoo_moments() {
        let mut all = vec![
            Dist::Exponential { rate: 1.0 },
            Dist::Exponential { rate: 2.0 },
            Dist::Pareto { shape: 5.0, scale: 1.0 },
            Dist::gamma(3.61, 1.41),
        ];
        for &g in &[0.0, 0.5, 1.0] {
            for &c in DominanceCase::ALL {
                let (f, gg) = dominance_pair(c, g).unwrap();
                all.push(f);
                // Pareto with shape ≤ 4 has no fourth moment
                if !matches!(gg, Dist::Pareto { shape, .. } if shape <= 4.0) {
                    all.push(gg);
                }
            }
        }
        for (i, d) in all.iter().enumerate() {
            moments_match(d, 100 + i as u64);
        }
    }

    #[test]
    fn pareto_inverse_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for a in [0.5, 1.5, 2.5] {
            let d = Dist::Pareto { shape: a, scale: 1.0 };
            let mut xs = d.sample(&mut rng, 20_000);
            assert!(xs.iter().all(|&x| x >= 1.0));
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = 1.0 - x.powf(-a);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            // 1.95/√n is the 0.1% Kolmogorov quantile
            assert!(ks < 1.95 / n.sqrt(), "a={a}: {ks}");
        }
    }

    #[test]
    fn null_case_is_identical() {
        let (f, g) = dominance_pair(DominanceCase::A, 0.0).unwrap();
        for x in [-2.0, 0.0, 1.3] {
            assert_eq!(f.cdf(x), g.cdf(x));
        }
        assert!(dominance_pair(DominanceCase::A, 1.5).is_err());
        assert!("z".parse::<DominanceCase>().is_err());
        assert_eq!("D".parse::<HellingerCase>().unwrap(), HellingerCase::D);
    }

    #[test]
    fn cdf_is_integral_of_pdf() {
        let ds = [
            Dist::gamma(2.0, 0.5),
            Dist::gamma(0.7, 2.0),
            Dist::Pareto { shape: 1.5, scale: 1.0 },
            dominance_pair(DominanceCase::E, 0.4).unwrap().1,
            Dist::Exponential { rate: 2.0 },
        ];
        for d in &ds {
            let lo = if let Dist::Mixture(_) = d { -20.0 } else { 0.0 };
            for x in [0.3, 1.0, 2.5, 6.0] {
                let c = integrate_with_breaks(|t| d.pdf(t), lo, x, &[1.0], 1e-12);
                assert!((c - d.cdf(x)).abs() < 1e-9, "{d:?} at {x}: {c} vs {}", d.cdf(x));
            }
        }
    }

    #[test]
    fn closed_form_truths_match_quadrature() {
        for &c in &[HellingerCase::A, HellingerCase::B, HellingerCase::D] {
            let (f, g) = hellinger_pair(c, None).unwrap();
            let q = hellinger_sq_quadrature(&f, &g);
            let exact = hellinger_truth_closed_form(c).unwrap();
            assert!((q - exact).abs() < 1e-10, "case {c}: {q} vs {exact}");
        }
        assert!((hellinger_truth_closed_form(HellingerCase::B).unwrap() - 0.117503097).abs() < 1e-9);
        assert!(hellinger_pair(HellingerCase::C, None).is_err());
    }

    #[test]
    fn quadrature_truth_for_shifted_normals() {
        // ℋ² between N(0,1) and N(μ,1) is 1 − e^{−μ²/8}
        for mu in [0.5, 3.0, 7.0] {
            let q = hellinger_sq_quadrature(&Dist::normal(0.0, 1.0), &Dist::normal(mu, 1.0));
            assert!((q + (-mu * mu / 8.0f64).exp_m1()).abs() < 1e-10, "mu={mu}");
        }
    }
}
