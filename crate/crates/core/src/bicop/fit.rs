//! Maximum-likelihood fitting of a single pair copula and AIC selection.

use serde::{Deserialize, Serialize};

use super::families::{clayton_log_pdf, frank_log_pdf, Base};
use super::{clamp_unit, Family, PairCopula, Rotation};
use crate::error::{Error, Result};
use crate::math::{kendall_tau, log_add_exp, norm_quantile};
use crate::optim::minimize_from;

/// Outcome of fitting one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub copula: PairCopula,
    pub loglik: f64,
    /// The optimizer stopped on the edge of the admissible parameter range.
    pub boundary: bool,
}

impl PairFit {
    pub fn n_params(&self) -> usize {
        self.copula.family().n_params()
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik + 2.0 * self.n_params() as f64
    }
}

const MIN_PAIRS: usize = 10;
const XTOL: f64 = 1e-8;

fn validate(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    if u.len() < MIN_PAIRS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_PAIRS} pairs to fit a copula, got {}",
            u.len()
        )));
    }
    if let Some((a, b)) = u.iter().zip(v).find(|(a, b)| !(**a > 0.0 && **a < 1.0 && **b > 0.0 && **b < 1.0)) {
        return Err(Error::Domain(format!("pair ({a}, {b}) not in (0,1)^2")));
    }
    let constant = |s: &[f64]| s.iter().all(|&x| x == s[0]);
    if constant(u) || constant(v) {
        return Err(Error::DegenerateData("a pair margin takes a single value".into()));
    }
    Ok(())
}

/// Fits `family` to the pairs `(u[i], v[i])` by maximum likelihood.
pub fn fit_pair(u: &[f64], v: &[f64], family: Family) -> Result<PairFit> {
    validate(u, v)?;
    let tau = if family == Family::Independence { 0.0 } else { kendall_tau(u, v) };
    Ok(fit_validated(u, v, family, tau))
}

/// Fits every candidate and returns the one with the smallest AIC. Ties go to
/// the earlier candidate.
pub fn select_family(u: &[f64], v: &[f64], candidates: &[Family]) -> Result<PairFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate family set".into()));
    }
    validate(u, v)?;
    let tau = kendall_tau(u, v);
    let mut best: Option<PairFit> = None;
    for &family in candidates {
        let fit = fit_validated(u, v, family, tau);
        if best.is_none_or(|b| fit.aic() < b.aic()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("non-empty candidates"))
}

fn rotate(rot: Rotation, u: f64, v: f64) -> (f64, f64) {
    let (u, v) = (clamp_unit(u), clamp_unit(v));
    match rot {
        Rotation::R0 => (u, v),
        Rotation::R90 => (1.0 - u, v),
        Rotation::R180 => (1.0 - u, 1.0 - v),
        Rotation::R270 => (u, 1.0 - v),
    }
}

/// Parameter map from the unbounded search scale, and its inverse.
fn to_theta(base: Base, z: f64) -> f64 {
    match base {
        Base::Gaussian => z.tanh(),
        Base::Clayton => z.exp(),
        Base::Gumbel => 1.0 + z.exp(),
        Base::Frank | Base::Independence => z,
    }
}

fn to_z(base: Base, theta: f64) -> f64 {
    match base {
        Base::Gaussian => theta.atanh(),
        Base::Clayton => theta.ln(),
        Base::Gumbel => (theta - 1.0).ln(),
        Base::Frank | Base::Independence => theta,
    }
}

/// Starting value from inverting Kendall's tau.
fn initial_theta(family: Family, base: Base, tau: f64) -> f64 {
    let t = if family.negative() { -tau } else { tau };
    let (lo, hi) = family.fit_bounds();
    let theta = match base {
        Base::Independence => 0.0,
        Base::Gaussian => (std::f64::consts::FRAC_PI_2 * t).sin(),
        Base::Clayton => {
            if t > 0.0 {
                2.0 * t / (1.0 - t)
            } else {
                0.1
            }
        }
        Base::Gumbel => {
            if t > 0.0 {
                1.0 / (1.0 - t)
            } else {
                1.05
            }
        }
        Base::Frank => {
            if t.abs() < 1e-6 {
                0.0
            } else {
                // tau is increasing in theta
                let (mut a, mut b) = (lo, hi);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if Base::Frank.tau(m) < t {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    };
    theta.clamp(lo, hi)
}

fn fit_validated(u: &[f64], v: &[f64], family: Family, tau: f64) -> PairFit {
    let (base, rot) = family.parts();
    if base == Base::Independence {
        return PairFit { copula: PairCopula::independence(), loglik: 0.0, boundary: false };
    }
    let n = u.len() as f64;
    let pts: Vec<(f64, f64)> = u.iter().zip(v).map(|(&a, &b)| rotate(rot, a, b)).collect();

    let objective: Box<dyn Fn(f64) -> f64> = match base {
        Base::Gaussian => {
            // The Gaussian log-likelihood depends on the normal scores only
            // through two sums.
            let (mut s2, mut s11) = (0.0, 0.0);
            for &(a, b) in &pts {
                let (x, y) = (norm_quantile(a), norm_quantile(b));
                s2 += x * x + y * y;
                s11 += x * y;
            }
            Box::new(move |rho: f64| {
                let om = 1.0 - rho * rho;
                -0.5 * n * om.ln() - (rho * rho * s2 - 2.0 * rho * s11) / (2.0 * om)
            })
        }
        Base::Clayton => {
            let logs: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (a.ln(), b.ln())).collect();
            Box::new(move |theta: f64| logs.iter().map(|&(lu, lv)| clayton_log_pdf(theta, lu, lv)).sum())
        }
        Base::Gumbel => {
            let cache: Vec<[f64; 4]> = pts
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (-a.ln(), -b.ln());
                    [x, y, x.ln(), y.ln()]
                })
                .collect();
            Box::new(move |theta: f64| {
                cache
                    .iter()
                    .map(|&[x, y, lx, ly]| {
                        let s = log_add_exp(theta * lx, theta * ly);
                        let a = (s / theta).exp();
                        -a + x + y + (theta - 1.0) * (lx + ly) + (1.0 - 2.0 * theta) * s / theta
                            + (a + theta - 1.0).ln()
                    })
                    .sum()
            })
        }
        Base::Frank => Box::new(move |theta: f64| pts.iter().map(|&(a, b)| frank_log_pdf(theta, a, b)).sum()),
        Base::Independence => unreachable!(),
    };

    let (lo, hi) = family.fit_bounds();
    let (zlo, zhi) = (to_z(base, lo), to_z(base, hi));
    let z0 = to_z(base, initial_theta(family, base, tau));
    let radius = if base == Base::Frank { 3.0 } else { 1.0 };
    let neg = |z: f64| {
        let ll = objective(to_theta(base, z));
        if ll.is_finite() {
            -ll
        } else {
            f64::MAX
        }
    };
    let m = minimize_from(neg, z0, zlo, zhi, radius, XTOL);
    let boundary = (m.x - zlo).abs() < 1e-6 || (zhi - m.x).abs() < 1e-6;
    let mut theta = to_theta(base, m.x).clamp(lo, hi);
    let mut loglik = -m.value;
    // Gumbel's θ = 1 is admissible but unreachable on the log(θ − 1) scale.
    if base == Base::Gumbel && boundary && m.x - zlo < 1e-6 {
        let at_one = objective(1.0);
        if at_one >= loglik {
            theta = 1.0;
            loglik = at_one;
        }
    }
    PairFit { copula: PairCopula::new_unchecked(family, theta), loglik, boundary }
}
