//! Formulas for the unrotated families. All functions expect arguments
//! already clamped into the open unit square.

use crate::error::{Error, Result};
use crate::math::{bivariate_normal_cdf, debye1, ln_1p_exp, log_add_exp, norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Base {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
}

/// Below this |θ| a Frank copula is evaluated as the independence copula.
const FRANK_EPS: f64 = 1e-10;

impl Base {
    pub(crate) fn log_pdf(self, theta: f64, u: f64, v: f64) -> f64 {
        match self {
            Base::Independence => 0.0,
            Base::Gaussian => {
                let (x, y) = (norm_quantile(u), norm_quantile(v));
                gaussian_log_pdf(theta, x, y)
            }
            Base::Clayton => clayton_log_pdf(theta, u.ln(), v.ln()),
            Base::Gumbel => gumbel_log_pdf(theta, -u.ln(), -v.ln()),
            Base::Frank => frank_log_pdf(theta, u, v),
        }
    }

    pub(crate) fn cdf(self, theta: f64, u: f64, v: f64) -> f64 {
        match self {
            Base::Independence => u * v,
            Base::Gaussian => bivariate_normal_cdf(norm_quantile(u), norm_quantile(v), theta),
            Base::Clayton => {
                let s = clayton_log_sum(theta, u.ln(), v.ln());
                (-s / theta).exp()
            }
            Base::Gumbel => {
                let (x, y) = (-u.ln(), -v.ln());
                let s = log_add_exp(theta * x.ln(), theta * y.ln());
                (-(s / theta).exp()).exp()
            }
            Base::Frank => {
                if theta.abs() < FRANK_EPS {
                    return u * v;
                }
                let a = (-theta * u).exp_m1();
                let b = (-theta * v).exp_m1();
                let d = (-theta).exp_m1();
                -(a * b / d).ln_1p() / theta
            }
        }
    }

    /// `∂C(u, v) / ∂v`, the conditional CDF of the first argument.
    pub(crate) fn h2(self, theta: f64, u: f64, v: f64) -> f64 {
        match self {
            Base::Independence => u,
            Base::Gaussian => {
                let (x, y) = (norm_quantile(u), norm_quantile(v));
                norm_cdf((x - theta * y) / (1.0 - theta * theta).sqrt())
            }
            Base::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                let s = clayton_log_sum(theta, lu, lv);
                (-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * s).exp()
            }
            Base::Gumbel => {
                let (x, y) = (-u.ln(), -v.ln());
                if theta == 1.0 {
                    return u;
                }
                let s = log_add_exp(theta * x.ln(), theta * y.ln());
                let a = (s / theta).exp();
                (-a + (1.0 - theta) * s / theta + (theta - 1.0) * y.ln() + y).exp()
            }
            Base::Frank => {
                if theta.abs() < FRANK_EPS {
                    return u;
                }
                let a = (-theta * u).exp_m1();
                let b = (-theta * v).exp_m1();
                let d = (-theta).exp_m1();
                (-theta * v).exp() * a / (d + a * b)
            }
        }
    }

    /// Solves `h2(u, v) = w` for `u`.
    pub(crate) fn h2_inv(self, theta: f64, w: f64, v: f64) -> Result<f64> {
        Ok(match self {
            Base::Independence => w,
            Base::Gaussian => {
                let y = norm_quantile(v);
                norm_cdf(norm_quantile(w) * (1.0 - theta * theta).sqrt() + theta * y)
            }
            Base::Clayton => {
                // ln u = −ln(1 + v^{−θ}(w^{−θ/(1+θ)} − 1)) / θ
                let bv = -theta * v.ln();
                let c = (-theta / (1.0 + theta) * w.ln()).exp_m1();
                (-ln_1p_exp(bv + c.ln()) / theta).exp()
            }
            Base::Frank => {
                if theta.abs() < FRANK_EPS {
                    return Ok(w);
                }
                let b = (-theta * v).exp_m1();
                let d = (-theta).exp_m1();
                let a = w * d / ((-theta * v).exp() - w * b);
                -a.ln_1p() / theta
            }
            Base::Gumbel => {
                if theta == 1.0 {
                    return Ok(w);
                }
                solve_increasing(|u| self.h2(theta, u, v) - w, |u| self.log_pdf(theta, u, v).exp(), w)?
            }
        })
    }

    pub(crate) fn tau(self, theta: f64) -> f64 {
        match self {
            Base::Independence => 0.0,
            Base::Gaussian => std::f64::consts::FRAC_2_PI * theta.asin(),
            Base::Clayton => theta / (theta + 2.0),
            Base::Gumbel => 1.0 - 1.0 / theta,
            Base::Frank => {
                if theta.abs() < FRANK_EPS {
                    0.0
                } else {
                    1.0 - 4.0 / theta * (1.0 - debye1(theta))
                }
            }
        }
    }
}

pub(crate) fn gaussian_log_pdf(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = rho * rho;
    let om = 1.0 - r2;
    -0.5 * om.ln() - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * om)
}

/// `ln(u^{−θ} + v^{−θ} − 1)` from `ln u`, `ln v`.
fn clayton_log_sum(theta: f64, lu: f64, lv: f64) -> f64 {
    let (a, b) = (-theta * lu, -theta * lv);
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    // e^hi + e^lo − 1 = e^hi (1 + e^{lo−hi} − e^{−hi})
    hi + ((lo - hi).exp() - (-hi).exp()).ln_1p()
}

pub(crate) fn clayton_log_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    let s = clayton_log_sum(theta, lu, lv);
    (1.0 + theta).ln() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * s
}

/// Gumbel log-density from `x = −ln u`, `y = −ln v`.
pub(crate) fn gumbel_log_pdf(theta: f64, x: f64, y: f64) -> f64 {
    let (lx, ly) = (x.ln(), y.ln());
    let s = log_add_exp(theta * lx, theta * ly);
    let a = (s / theta).exp();
    -a + x + y + (theta - 1.0) * (lx + ly) + (1.0 - 2.0 * theta) * s / theta + (a + theta - 1.0).ln()
}

pub(crate) fn frank_log_pdf(theta: f64, u: f64, v: f64) -> f64 {
    if theta.abs() < FRANK_EPS {
        return 0.0;
    }
    let a = (-theta * u).exp_m1();
    let b = (-theta * v).exp_m1();
    let d = (-theta).exp_m1();
    (-theta * d).ln() - theta * (u + v) - 2.0 * (d + a * b).abs().ln()
}

pub(crate) const MAX_ROOT_STEPS: usize = 200;

/// Root of an increasing function on (0, 1) by Newton steps safeguarded with
/// bisection. `deriv` must be the derivative of `f`.
pub(crate) fn solve_increasing<F, D>(f: F, deriv: D, guess: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (super::CLAMP_LO, super::CLAMP_HI);
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) <= 0.0 {
        return Ok(hi);
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..MAX_ROOT_STEPS {
        let g = f(x);
        if g == 0.0 {
            return Ok(x);
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = deriv(x);
        let mut next = x - g / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-3) || hi - lo <= 1e-15 {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "root search did not converge in {MAX_ROOT_STEPS} steps (bracket [{lo}, {hi}])"
    )))
}
