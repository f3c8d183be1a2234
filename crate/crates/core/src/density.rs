//! A fitted distribution of any supported family behind one interface.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::empirical::{Ecdf, Sample};
use crate::error::{Error, Result};
use crate::kde::{kde_fit, Bandwidth, KdeFit};
use crate::logconcave::{lc_fit, lc_smooth, LogConcaveFit, SmoothedLogConcaveFit, DEFAULT_TOL};
use crate::unimodal::{birge_fit, BirgeConfig, StepDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Empirical,
    Unimodal,
    Logconcave,
    LogconcaveSmoothed,
    Kde,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Empirical => "empirical",
            Family::Unimodal => "unimodal",
            Family::Logconcave => "logconcave",
            Family::LogconcaveSmoothed => "logconcave-smoothed",
            Family::Kde => "kde",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "empirical" => Family::Empirical,
            "unimodal" => Family::Unimodal,
            "logconcave" => Family::Logconcave,
            "logconcave-smoothed" => Family::LogconcaveSmoothed,
            "kde" => Family::Kde,
            _ => return Err(Error::invalid(format!("unknown family '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Birgé tolerance; `1/m` when unset.
    pub eta: Option<f64>,
    pub lc_tol: f64,
    pub bandwidth: Bandwidth,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eta: None,
            lc_tol: DEFAULT_TOL,
            bandwidth: Bandwidth::Lscv,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Empirical(Ecdf),
    Step(StepDensity),
    LogConcave(LogConcaveFit),
    Smoothed(SmoothedLogConcaveFit),
    Kde(KdeFit),
}

/// A distribution estimated from one sample.
#[derive(Debug, Clone)]
pub struct DistributionHandle {
    family: Family,
    sample_size: usize,
    /// Distinct observed values.
    points: Vec<f64>,
    model: Model,
}

impl DistributionHandle {
    pub fn fit(sample: &Sample, family: Family, opts: &FitOptions) -> Result<Self> {
        let model = match family {
            Family::Empirical => Model::Empirical(Ecdf::new(sample)),
            Family::Unimodal => {
                let eta = opts.eta.unwrap_or(1.0 / sample.len() as f64);
                Model::Step(birge_fit(sample, BirgeConfig::new(eta)?)?.density)
            }
            Family::Logconcave => Model::LogConcave(lc_fit(sample, opts.lc_tol)?),
            Family::LogconcaveSmoothed => {
                let base = lc_fit(sample, opts.lc_tol)?;
                Model::Smoothed(lc_smooth(&base, sample)?)
            }
            Family::Kde => Model::Kde(kde_fit(sample, opts.bandwidth)?),
        };
        Ok(Self::from_model(model, family, sample))
    }

    pub fn from_model(model: Model, family: Family, sample: &Sample) -> Self {
        DistributionHandle {
            family,
            sample_size: sample.len(),
            points: sample.distinct().0,
            model,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.model, Model::Empirical(_))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.model {
            Model::Empirical(e) => e.eval(x),
            Model::Step(f) => f.cdf(x),
            Model::LogConcave(f) => f.cdf(x),
            Model::Smoothed(f) => f.cdf(x),
            Model::Kde(f) => f.cdf(x),
        }
    }

    /// Density at `x`; zero for the empirical family, which has none.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.model {
            Model::Empirical(_) => 0.0,
            Model::Step(f) => f.pdf(x),
            Model::LogConcave(f) => f.pdf(x),
            Model::Smoothed(f) => f.pdf(x),
            Model::Kde(f) => f.pdf(x),
        }
    }

    /// Interval carrying all the mass up to double precision.
    pub fn range(&self) -> (f64, f64) {
        match &self.model {
            Model::Empirical(e) => (e.support()[0], *e.support().last().unwrap()),
            Model::Step(f) => f.support(),
            Model::LogConcave(f) => f.support(),
            Model::Smoothed(f) => f.effective_support(),
            Model::Kde(f) => f.effective_support(),
        }
    }

    /// Points where the density has a jump or a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.model {
            Model::Empirical(e) => e.support().to_vec(),
            Model::Step(f) => f.breakpoints().to_vec(),
            Model::LogConcave(f) => f.active_knots().to_vec(),
            Model::Smoothed(f) => f.base().active_knots().to_vec(),
            Model::Kde(_) => Vec::new(),
        }
    }

    /// `∫ f²`, exact where a closed form exists.
    pub fn integral_sq(&self) -> Result<f64> {
        Ok(match &self.model {
            Model::Empirical(_) => {
                return Err(Error::invalid("the empirical family has no density"));
            }
            Model::Step(f) => f.integral_sq(),
            Model::LogConcave(f) => f.integral_sq(),
            Model::Kde(f) => f.integral_sq(),
            Model::Smoothed(_) => {
                let (lo, hi) = self.range();
                crate::quad::integrate_with_breaks(|x| self.pdf(x).powi(2), lo, hi, &self.breakpoints(), 1e-10)
            }
        })
    }
}
