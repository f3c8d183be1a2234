//! Samples, empirical distribution functions, generalized quantiles and the
//! pooled-quantile trimming interval used by the dominance tests.

use serde::Serialize;

use crate::error::{Error, Result};

/// Finite observations stored in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        values.sort_by(f64::total_cmp);
        Ok(Sample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Variance with divisor `m` (not `m − 1`).
    pub fn variance_pop(&self) -> f64 {
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.len() as f64
    }

    pub fn sd(&self) -> f64 {
        let n = self.len() as f64;
        (self.variance_pop() * n / (n - 1.0).max(1.0)).sqrt()
    }

    /// Distinct values with their multiplicities.
    pub fn distinct(&self) -> (Vec<f64>, Vec<usize>) {
        let mut xs: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &v in &self.values {
            match xs.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    xs.push(v);
                    counts.push(1);
                }
            }
        }
        (xs, counts)
    }

    pub fn n_distinct(&self) -> usize {
        1 + self.values.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn has_ties(&self) -> bool {
        self.n_distinct() < self.len()
    }

    /// Concatenation of two samples.
    pub fn pooled(a: &Sample, b: &Sample) -> Sample {
        let mut values = Vec::with_capacity(a.len() + b.len());
        values.extend_from_slice(&a.values);
        values.extend_from_slice(&b.values);
        values.sort_by(f64::total_cmp);
        Sample { values }
    }

    /// Applies `f` to every value; `f` must map finite values to finite values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Sample> {
        Sample::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Right-continuous step distribution function of a sample.
#[derive(Debug, Clone)]
pub struct Ecdf {
    support: Vec<f64>,
    cum_counts: Vec<usize>,
    n: usize,
}

impl Ecdf {
    pub fn new(sample: &Sample) -> Ecdf {
        let (support, counts) = sample.distinct();
        let mut acc = 0;
        let cum_counts = counts
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect();
        Ecdf {
            support,
            cum_counts,
            n: sample.len(),
        }
    }

    pub fn pooled(a: &Sample, b: &Sample) -> Ecdf {
        Ecdf::new(&Sample::pooled(a, b))
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Cumulative probabilities at the support points.
    pub fn cum_probs(&self) -> Vec<f64> {
        self.cum_counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    /// Number of observations `≤ x`.
    pub fn count_le(&self, x: f64) -> usize {
        let k = self.support.partition_point(|&s| s <= x);
        if k == 0 {
            0
        } else {
            self.cum_counts[k - 1]
        }
    }

    /// Number of observations `< x`.
    pub fn count_lt(&self, x: f64) -> usize {
        let k = self.support.partition_point(|&s| s < x);
        if k == 0 {
            0
        } else {
            self.cum_counts[k - 1]
        }
    }

    /// `#{values ≤ x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.n as f64
    }

    /// Left limit `#{values < x} / n`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.count_lt(x) as f64 / self.n as f64
    }

    /// Index into `support` of `inf{x : F(x) ≥ t}`.
    ///
    /// `t·n` within a relative `1e-12` of an integer is snapped to it so
    /// that levels such as `1 − 0.1` land on the intended order statistic.
    pub fn quantile_index(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {t}")));
        }
        let target = t * self.n as f64 * (1.0 - 1e-12);
        Ok(self
            .cum_counts
            .partition_point(|&c| (c as f64) < target)
            .min(self.support.len() - 1))
    }

    /// Generalized inverse `inf{x : F(x) ≥ t}`.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        Ok(self.support[self.quantile_index(t)?])
    }
}

/// The closed interval `[H⁻¹(p), H⁻¹(1 − p)]` of the pooled ECDF `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrimInterval {
    pub lower: f64,
    pub upper: f64,
    /// Trimming level, `None` for a user-supplied interval.
    pub p: Option<f64>,
    /// Set when `lower == upper`.
    pub degenerate: bool,
}

impl TrimInterval {
    pub fn from_pooled(pooled: &Ecdf, p: f64) -> Result<TrimInterval> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::invalid(format!("trimming level p must lie in (0, 1/2), got {p}")));
        }
        let lower = pooled.quantile(p)?;
        let upper = pooled.quantile(1.0 - p)?;
        let degenerate = lower == upper;
        if degenerate {
            log::warn!("trimmed interval collapsed to the single point {lower}");
        }
        Ok(TrimInterval {
            lower,
            upper,
            p: Some(p),
            degenerate,
        })
    }

    /// A user-chosen compact interval in place of the quantile rule.
    pub fn custom(lower: f64, upper: f64) -> Result<TrimInterval> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::invalid(format!("invalid interval [{lower}, {upper}]")));
        }
        Ok(TrimInterval {
            lower,
            upper,
            p: None,
            degenerate: lower == upper,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Pooled trimming interval for two samples.
pub fn trim_interval(pooled: &Ecdf, p: f64) -> Result<TrimInterval> {
    TrimInterval::from_pooled(pooled, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    fn one_to(n: usize) -> Sample {
        sample(&(1..=n).map(|i| i as f64).collect::<Vec<_>>())
    }

    #[test]
    fn ecdf_counts() {
        let e = Ecdf::new(&sample(&[3.0, 1.0, 2.0]));
        assert_eq!(e.eval(2.0), 2.0 / 3.0);
        let e = Ecdf::new(&sample(&[5.0]));
        assert_eq!(e.eval(4.9), 0.0);
        assert_eq!(e.eval(5.0), 1.0);
        let e = Ecdf::new(&sample(&[1.0, 1.0, 3.0]));
        assert_eq!(e.eval(1.0), 2.0 / 3.0);
        assert_eq!(e.eval_left(1.0), 0.0);
        assert_eq!(*e.cum_probs().last().unwrap(), 1.0);
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(matches!(Sample::new(vec![]), Err(Error::EmptySample)));
        assert!(matches!(
            Sample::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(Sample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn quantile_examples() {
        let e = Ecdf::new(&one_to(4));
        assert_eq!(e.quantile(0.5).unwrap(), 2.0);
        let e = Ecdf::new(&one_to(10));
        assert_eq!(e.quantile(0.075).unwrap(), 1.0);
        // step levels 0.1, …, 1.0: the first reaching 0.925 is 1.0 at x = 10
        assert_eq!(e.quantile(0.925).unwrap(), 10.0);
        for t in [0.0, 1.0, -0.5, 2.0] {
            assert!(e.quantile(t).is_err());
        }
    }

    #[test]
    fn trim_interval_examples() {
        let e = Ecdf::new(&one_to(10));
        let d = trim_interval(&e, 0.1).unwrap();
        assert_eq!((d.lower, d.upper), (1.0, 9.0));
        assert!(!d.degenerate);

        let e = Ecdf::new(&sample(&[2.5; 7]));
        let d = trim_interval(&e, 0.2).unwrap();
        assert_eq!((d.lower, d.upper), (2.5, 2.5));
        assert!(d.degenerate);

        assert!(trim_interval(&e, 0.5).is_err());
        assert!(trim_interval(&e, 0.0).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-20i32..20).prop_map(|v| v as f64 * 0.5), 1..60)
    }

    proptest! {
        #[test]
        fn generalized_inverse(v in arb_sample(), t in 0.001f64..0.999) {
            let e = Ecdf::new(&Sample::new(v).unwrap());
            let q = e.quantile(t).unwrap();
            prop_assert!(e.eval(q) >= t * (1.0 - 1e-12));
            // any support point below q has F < t
            for &s in e.support().iter().filter(|&&s| s < q) {
                prop_assert!(e.eval(s) < t);
            }
        }

        #[test]
        fn quantile_monotone_and_trim_shrinks(v in arb_sample(), a in 0.001f64..0.49, b in 0.001f64..0.49) {
            let e = Ecdf::new(&Sample::new(v).unwrap());
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(e.quantile(lo).unwrap() <= e.quantile(hi).unwrap());
            let wide = trim_interval(&e, lo).unwrap();
            let narrow = trim_interval(&e, hi).unwrap();
            prop_assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
        }

        #[test]
        fn ecdf_reproduces_ranks(v in arb_sample()) {
            let s = Sample::new(v).unwrap();
            let e = Ecdf::new(&s);
            let n = s.len();
            for &x in s.values() {
                let rank = s.values().iter().filter(|&&y| y <= x).count();
                prop_assert_eq!(e.eval(x), rank as f64 / n as f64);
            }
        }
    }
}
