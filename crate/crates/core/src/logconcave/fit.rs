//! Active-set maximization of `Σ wᵢ φ(xᵢ) − ∫ exp φ` over concave
//! piecewise-linear `φ` with knots at the distinct observations.
//!
//! The data are rescaled to `[0, 1]`. The working set `S` holds the knots
//! where `φ` may bend; between them `φ` is linear. For fixed `S` the
//! objective is smooth and strictly concave in the values of `φ` on `S`,
//! with a tridiagonal Hessian, and is maximized by damped Newton steps. A
//! maximizer that bends the wrong way at some knot is pulled back along the
//! segment to the current feasible point and the offending knot leaves `S`.
//! A knot joins `S` when bending there increases the objective, measured by
//! the directional derivative along the hinge `−(x − t)₊`.

use super::{segment, LogConcaveFit};
use crate::empirical::Sample;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;

const NEWTON_MAX: usize = 200;

struct Problem {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Problem {
    /// Coefficients of the data term `Σ wᵢ φ(xᵢ)` as a linear function of
    /// the values on `set`.
    fn data_coefficients(&self, set: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; set.len()];
        let mut k = 0;
        for (i, (&xi, &wi)) in self.x.iter().zip(&self.w).enumerate() {
            while k + 2 < set.len() && i > set[k + 1] {
                k += 1;
            }
            let (l, r) = (self.x[set[k]], self.x[set[k + 1]]);
            let lam = ((xi - l) / (r - l)).clamp(0.0, 1.0);
            c[k] += wi * (1.0 - lam);
            c[k + 1] += wi * lam;
        }
        c
    }

    fn objective(&self, set: &[usize], coef: &[f64], theta: &[f64]) -> f64 {
        let lin: f64 = coef.iter().zip(theta).map(|(c, t)| c * t).sum();
        let int: f64 = (0..set.len() - 1)
            .map(|k| segment(theta[k], theta[k + 1], self.x[set[k + 1]] - self.x[set[k]]).j)
            .sum();
        lin - int
    }

    /// Newton ascent on the values at `set`, starting from `theta`.
    fn maximize(&self, set: &[usize], theta: &mut [f64]) -> Result<()> {
        let r = set.len();
        let coef = self.data_coefficients(set);
        let mut grad = vec![0.0; r];
        let mut diag = vec![0.0; r];
        let mut off = vec![0.0; r - 1];
        let mut trial = vec![0.0; r];
        let mut value = self.objective(set, &coef, theta);
        for _ in 0..NEWTON_MAX {
            grad.copy_from_slice(&coef);
            diag.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..r - 1 {
                let s = segment(theta[k], theta[k + 1], self.x[set[k + 1]] - self.x[set[k]]);
                grad[k] -= s.ja;
                grad[k + 1] -= s.jb;
                diag[k] += s.jaa;
                diag[k + 1] += s.jbb;
                off[k] = s.jab;
            }
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < 1e-14 {
                return Ok(());
            }
            let step = thomas(&diag, &off, &grad)?;
            let decrement: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
            if !(decrement > 1e-28) {
                return Ok(());
            }
            let mut t = 1.0;
            loop {
                for k in 0..r {
                    trial[k] = theta[k] + t * step[k];
                }
                let v = self.objective(set, &coef, &trial);
                if v.is_finite() && v >= value + 1e-4 * t * decrement {
                    value = v;
                    theta.copy_from_slice(&trial);
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    // no further progress at machine precision
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    /// Values at every knot by linear interpolation of the values on `set`.
    fn interpolate(&self, set: &[usize], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.x.len()];
        for k in 0..set.len() - 1 {
            let (i0, i1) = (set[k], set[k + 1]);
            let (l, r) = (self.x[i0], self.x[i1]);
            for i in i0..=i1 {
                let lam = (self.x[i] - l) / (r - l);
                out[i] = theta[k] + lam * (theta[k + 1] - theta[k]);
            }
        }
        out
    }

    /// Directional derivative of the objective along `−(x − xⱼ)₊` for every
    /// knot `j`: `∫ (x − xⱼ)₊ e^φ − Σ wᵢ (xᵢ − xⱼ)₊`.
    fn hinge_derivatives(&self, phi: &[f64]) -> Vec<f64> {
        let k = self.x.len();
        let mut cum = vec![0.0; k];
        let mut segs = Vec::with_capacity(k - 1);
        for i in 0..k - 1 {
            let s = segment(phi[i], phi[i + 1], self.x[i + 1] - self.x[i]);
            cum[i + 1] = cum[i] + s.j;
            segs.push(s);
        }
        let total = cum[k - 1];
        let mut out = vec![0.0; k];
        let (mut model, mut data, mut w_right) = (0.0, 0.0, 0.0);
        for i in (0..k - 1).rev() {
            let d = self.x[i + 1] - self.x[i];
            // ∫ over the piece of (total − F(x)) dx
            model += d * (total - cum[i]) - d * segs[i].ja;
            w_right += self.w[i + 1];
            data += d * w_right;
            out[i] = model - data;
        }
        out
    }
}

/// Solves a symmetric positive-definite tridiagonal system.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if !(denom > 0.0) {
        return Err(Error::Numerical("singular Hessian in log-concave fit".into()));
    }
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if !(denom > 0.0) {
            return Err(Error::Numerical("singular Hessian in log-concave fit".into()));
        }
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Slope changes at the interior points of `set`; feasible when all `≤ 0`.
fn bends(x: &[f64], set: &[usize], theta: &[f64]) -> Vec<f64> {
    let slopes: Vec<f64> = (0..set.len() - 1)
        .map(|k| (theta[k + 1] - theta[k]) / (x[set[k + 1]] - x[set[k]]))
        .collect();
    slopes.windows(2).map(|s| s[1] - s[0]).collect()
}

/// Log-concave MLE. `tol` bounds the directional derivative of the
/// objective at termination, in units of the data range.
pub fn lc_fit(sample: &Sample, tol: f64) -> Result<LogConcaveFit> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (values, counts) = sample.distinct();
    if values.len() < 2 {
        return Err(Error::Degenerate(
            "log-concave MLE needs at least two distinct observations".into(),
        ));
    }
    let lo = values[0];
    let range = values[values.len() - 1] - lo;
    let n = sample.len() as f64;
    let problem = Problem {
        x: values.iter().map(|v| (v - lo) / range).collect(),
        w: counts.iter().map(|&c| c as f64 / n).collect(),
    };
    let k = problem.x.len();

    let mut set = vec![0, k - 1];
    let mut phi = vec![0.0; k];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let current: Vec<f64> = set.iter().map(|&i| phi[i]).collect();
        let mut proposal = current.clone();
        problem.maximize(&set, &mut proposal)?;

        let b_new = bends(&problem.x, &set, &proposal);
        if b_new.iter().any(|&b| b > 0.0) {
            let b_old = bends(&problem.x, &set, &current);
            let mut t = 1.0f64;
            for (bo, bn) in b_old.iter().zip(&b_new) {
                if *bn > 0.0 {
                    t = t.min(bo.min(0.0) / (bo.min(0.0) - bn));
                }
            }
            let theta: Vec<f64> = current
                .iter()
                .zip(&proposal)
                .map(|(c, p)| c + t * (p - c))
                .collect();
            let b_mid = bends(&problem.x, &set, &theta);
            let scale = b_old
                .iter()
                .chain(&b_new)
                .fold(0.0f64, |m, b| m.max(b.abs()))
                .max(1e-300);
            let worst = b_mid
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &b)| if b > acc.1 { (j, b) } else { acc });
            let keep: Vec<bool> = b_mid
                .iter()
                .enumerate()
                .map(|(j, &b)| j != worst.0 && b < -1e-13 * scale)
                .collect();
            phi = problem.interpolate(&set, &theta);
            set = std::iter::once(set[0])
                .chain(
                    set[1..set.len() - 1]
                        .iter()
                        .zip(&keep)
                        .filter(|(_, k)| **k)
                        .map(|(i, _)| *i),
                )
                .chain(std::iter::once(k - 1))
                .collect();
            // interpolation on the reduced set is exact up to the removed bends
            let theta: Vec<f64> = set.iter().map(|&i| phi[i]).collect();
            phi = problem.interpolate(&set, &theta);
            continue;
        }

        phi = problem.interpolate(&set, &proposal);
        let d = problem.hinge_derivatives(&phi);
        let (best, best_d) = d
            .iter()
            .enumerate()
            .filter(|(i, _)| set.binary_search(i).is_err())
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        gap = best_d.max(0.0);
        if best == usize::MAX || best_d <= tol {
            let knots = values.clone();
            let phi_orig: Vec<f64> = phi.iter().map(|p| p - range.ln()).collect();
            return LogConcaveFit::assemble(knots, phi_orig, gap, iterations);
        }
        let pos = set.binary_search(&best).unwrap_err();
        set.insert(pos, best);
    }
    Err(Error::NonConvergence {
        iterations,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_with_breaks;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp, Normal};

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_points_give_uniform() {
        let f = lc_fit(&sample(&[0.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!(f.phi().iter().all(|p| p.abs() < 1e-10));
        assert!((f.cdf(0.25) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn needs_two_distinct_values() {
        assert!(matches!(lc_fit(&sample(&[2.0, 2.0]), DEFAULT_TOL), Err(Error::Degenerate(_))));
    }

    /// Concave, normalized, mean-matching and stationary, with directional
    /// derivatives recomputed by quadrature.
    fn check_fit(values: &[f64]) {
        let s = sample(values);
        let f = lc_fit(&s, DEFAULT_TOL).unwrap();
        let (x, p) = (f.knots(), f.phi());
        for i in 1..x.len() - 1 {
            let l = (p[i] - p[i - 1]) / (x[i] - x[i - 1]);
            let r = (p[i + 1] - p[i]) / (x[i + 1] - x[i]);
            assert!(r - l <= 1e-9 * (1.0 + l.abs()), "not concave at {i}");
        }
        let (lo, hi) = f.support();
        let mass = integrate_with_breaks(|t| f.pdf(t), lo, hi, f.active_knots(), 1e-12);
        assert!((mass - 1.0).abs() < 1e-8);
        assert!((f.mean() - s.mean()).abs() < 1e-8 * (1.0 + s.mean().abs()));
        let range = hi - lo;
        for &t in f.knots() {
            let model = integrate_with_breaks(|u| (u - t).max(0.0) * f.pdf(u), lo, hi, f.active_knots(), 1e-12);
            let data: f64 = s.values().iter().map(|v| (v - t).max(0.0)).sum::<f64>() / s.len() as f64;
            assert!((model - data) / range <= 1e-6, "gap at {t}: {}", model - data);
        }
        assert!(f.mean_log_likelihood(s.values()) >= -range.ln() - 1e-12);
    }

    #[test]
    fn random_fits_are_optimal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let norm = Normal::new(0.0, 1.0).unwrap();
        for n in [3, 5, 20, 100, 400] {
            let v: Vec<f64> = (0..n).map(|_| norm.sample(&mut rng)).collect();
            check_fit(&v);
        }
        check_fit(&[0.0, 0.0, 1.0, 5.0, 5.0, 5.0, 6.0]);
        check_fit(&[1.0, 2.0, 2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn exponential_data_slope() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let e = Exp::new(1.0).unwrap();
        let v: Vec<f64> = (0..2000).map(|_| e.sample(&mut rng)).collect();
        let f = lc_fit(&sample(&v), DEFAULT_TOL).unwrap();
        let (lo, hi) = f.support();
        // slope over the bulk of the support
        let (a, b) = (lo + 0.05 * (hi - lo), lo + 0.5 * (hi - lo));
        let slope = (f.log_pdf(b) - f.log_pdf(a)) / (b - a);
        assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn thomas_solves() {
        let x = thomas(&[4.0, 4.0, 4.0], &[1.0, 1.0], &[5.0, 6.0, 5.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }
}
