//! Bivariate copula families used as vine building blocks.
//!
//! Every family is evaluated through an unrotated base formula. Rotations by
//! 90°, 180° and 270° reflect one or both arguments, which turns the
//! positively dependent Clayton and Gumbel copulas into models for negative
//! dependence (90°, 270°) or for the opposite tail (180°).
//!
//! Two conditional distribution functions exist for a pair: [`PairCopula::h2`]
//! conditions on the second argument and [`PairCopula::h1`] on the first.
//! The public `h_function` is `h2`, i.e. `P(U ≤ u | V = v) = ∂C(u, v)/∂v`.

mod families;
mod fit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use families::Base;

pub use fit::{fit_pair, select_family, PairFit};

/// Lower clamp applied to copula arguments before evaluation.
pub const CLAMP_LO: f64 = 1e-10;
/// Upper clamp applied to copula arguments before evaluation.
pub const CLAMP_HI: f64 = 1.0 - 1e-10;

#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(CLAMP_LO, CLAMP_HI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Independence,
    Gaussian,
    Clayton,
    Clayton90,
    Clayton180,
    Clayton270,
    Gumbel,
    Gumbel90,
    Gumbel180,
    Gumbel270,
    Frank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Independence,
        Family::Gaussian,
        Family::Clayton,
        Family::Clayton90,
        Family::Clayton180,
        Family::Clayton270,
        Family::Gumbel,
        Family::Gumbel90,
        Family::Gumbel180,
        Family::Gumbel270,
        Family::Frank,
    ];

    fn parts(self) -> (Base, Rotation) {
        use Family::*;
        match self {
            Independence => (Base::Independence, Rotation::R0),
            Gaussian => (Base::Gaussian, Rotation::R0),
            Clayton => (Base::Clayton, Rotation::R0),
            Clayton90 => (Base::Clayton, Rotation::R90),
            Clayton180 => (Base::Clayton, Rotation::R180),
            Clayton270 => (Base::Clayton, Rotation::R270),
            Gumbel => (Base::Gumbel, Rotation::R0),
            Gumbel90 => (Base::Gumbel, Rotation::R90),
            Gumbel180 => (Base::Gumbel, Rotation::R180),
            Gumbel270 => (Base::Gumbel, Rotation::R270),
            Frank => (Base::Frank, Rotation::R0),
        }
    }

    /// Number of free parameters.
    pub fn n_params(self) -> usize {
        if self == Family::Independence {
            0
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        use Family::*;
        match self {
            Independence => "independence",
            Gaussian => "gaussian",
            Clayton => "clayton",
            Clayton90 => "clayton90",
            Clayton180 => "clayton180",
            Clayton270 => "clayton270",
            Gumbel => "gumbel",
            Gumbel90 => "gumbel90",
            Gumbel180 => "gumbel180",
            Gumbel270 => "gumbel270",
            Frank => "frank",
        }
    }

    /// Closed admissible parameter range used by the fitting routines.
    pub(crate) fn fit_bounds(self) -> (f64, f64) {
        match self.parts().0 {
            Base::Independence => (0.0, 0.0),
            Base::Gaussian => (-0.9999, 0.9999),
            Base::Clayton => (1e-4, 40.0),
            Base::Gumbel => (1.0001, 30.0),
            Base::Frank => (-50.0, 50.0),
        }
    }

    /// Whether the family models negative association.
    fn negative(self) -> bool {
        matches!(self.parts().1, Rotation::R90 | Rotation::R270)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown copula family '{s}'")))
    }
}

/// A bivariate copula: family tag plus its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct PairCopula {
    family: Family,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    family: Family,
    theta: Vec<f64>,
}

impl From<PairCopula> for RawPair {
    fn from(c: PairCopula) -> Self {
        RawPair { family: c.family, theta: c.params() }
    }
}

impl TryFrom<RawPair> for PairCopula {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        match (raw.family, raw.theta.as_slice()) {
            (Family::Independence, []) => Ok(PairCopula::independence()),
            (f, [t]) => PairCopula::new(f, *t),
            (f, t) => Err(Error::InvalidInput(format!(
                "family {f} expects {} parameter(s), got {}",
                f.n_params(),
                t.len()
            ))),
        }
    }
}

impl PairCopula {
    /// Validates `theta` against the family's admissible domain.
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && match family.parts().0 {
                Base::Independence => true,
                Base::Gaussian => theta > -1.0 && theta < 1.0,
                Base::Clayton => theta > 0.0,
                Base::Gumbel => theta >= 1.0,
                Base::Frank => theta != 0.0,
            };
        if !ok {
            return Err(Error::InvalidInput(format!("parameter {theta} outside the {family} domain")));
        }
        let theta = if family == Family::Independence { 0.0 } else { theta };
        Ok(Self { family, theta })
    }

    pub fn independence() -> Self {
        Self { family: Family::Independence, theta: 0.0 }
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::new(Family::Gaussian, rho)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(Family::Clayton, theta)
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(Family::Gumbel, theta)
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(Family::Frank, theta)
    }

    /// Fitting routines may land on Frank's independence limit θ = 0.
    pub(crate) fn new_unchecked(family: Family, theta: f64) -> Self {
        Self { family, theta }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The single parameter (0 for independence).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The parameter vector, empty for independence.
    pub fn params(&self) -> Vec<f64> {
        if self.family == Family::Independence {
            Vec::new()
        } else {
            vec![self.theta]
        }
    }

    pub fn is_independence(&self) -> bool {
        self.family == Family::Independence
    }

    /// Kendall's tau implied by the model.
    pub fn tau(&self) -> f64 {
        let (base, rot) = self.family.parts();
        let t = base.tau(self.theta);
        match rot {
            Rotation::R0 | Rotation::R180 => t,
            Rotation::R90 | Rotation::R270 => -t,
        }
    }

    /// Log-density; arguments are clamped, not checked.
    #[inline]
    pub fn log_pdf(&self, u: f64, v: f64) -> f64 {
        let (base, rot) = self.family.parts();
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match rot {
            Rotation::R0 => base.log_pdf(self.theta, u, v),
            Rotation::R90 => base.log_pdf(self.theta, 1.0 - u, v),
            Rotation::R180 => base.log_pdf(self.theta, 1.0 - u, 1.0 - v),
            Rotation::R270 => base.log_pdf(self.theta, u, 1.0 - v),
        }
    }

    /// `∂C(u, v)/∂v`; arguments are clamped, not checked.
    #[inline]
    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let (base, rot) = self.family.parts();
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let t = self.theta;
        match rot {
            Rotation::R0 => base.h2(t, u, v),
            Rotation::R90 => 1.0 - base.h2(t, 1.0 - u, v),
            Rotation::R180 => 1.0 - base.h2(t, 1.0 - u, 1.0 - v),
            Rotation::R270 => base.h2(t, u, 1.0 - v),
        }
    }

    /// `∂C(u, v)/∂u`; arguments are clamped, not checked.
    #[inline]
    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (base, rot) = self.family.parts();
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let t = self.theta;
        // All base families are exchangeable, so ∂C/∂u at (u, v) is h2 at (v, u).
        match rot {
            Rotation::R0 => base.h2(t, v, u),
            Rotation::R90 => base.h2(t, v, 1.0 - u),
            Rotation::R180 => 1.0 - base.h2(t, 1.0 - v, 1.0 - u),
            Rotation::R270 => 1.0 - base.h2(t, 1.0 - v, u),
        }
    }

    /// Solves `h2(u, v) = w` for `u`.
    pub fn h2_inv(&self, w: f64, v: f64) -> Result<f64> {
        let (base, rot) = self.family.parts();
        let (w, v) = (clamp_unit(w), clamp_unit(v));
        let t = self.theta;
        let u = match rot {
            Rotation::R0 => base.h2_inv(t, w, v)?,
            Rotation::R90 => 1.0 - base.h2_inv(t, 1.0 - w, v)?,
            Rotation::R180 => 1.0 - base.h2_inv(t, 1.0 - w, 1.0 - v)?,
            Rotation::R270 => base.h2_inv(t, w, 1.0 - v)?,
        };
        Ok(clamp_unit(u))
    }

    /// Solves `h1(u, v) = w` for `v`.
    pub fn h1_inv(&self, w: f64, u: f64) -> Result<f64> {
        let (base, rot) = self.family.parts();
        let (w, u) = (clamp_unit(w), clamp_unit(u));
        let t = self.theta;
        let v = match rot {
            Rotation::R0 => base.h2_inv(t, w, u)?,
            Rotation::R90 => base.h2_inv(t, w, 1.0 - u)?,
            Rotation::R180 => 1.0 - base.h2_inv(t, 1.0 - w, 1.0 - u)?,
            Rotation::R270 => 1.0 - base.h2_inv(t, 1.0 - w, u)?,
        };
        Ok(clamp_unit(v))
    }

    /// Copula density `c(u, v)` for `u, v ∈ (0, 1)`.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        check_open(u, v)?;
        Ok(self.log_pdf(u, v).exp())
    }

    /// Copula CDF `C(u, v)` for `u, v ∈ [0, 1]`.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_closed(u, v)?;
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let (base, rot) = self.family.parts();
        let t = self.theta;
        let c = match rot {
            Rotation::R0 => base.cdf(t, u, v),
            Rotation::R90 => v - base.cdf(t, 1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + base.cdf(t, 1.0 - u, 1.0 - v),
            Rotation::R270 => u - base.cdf(t, u, 1.0 - v),
        };
        Ok(c.clamp(0.0, u.min(v)))
    }

    /// Conditional CDF `P(U ≤ u | V = v) = ∂C(u, v)/∂v`.
    pub fn h_function(&self, u: f64, v: f64) -> Result<f64> {
        check_open(u, v)?;
        Ok(self.h2(u, v))
    }

    /// Inverse of [`h_function`](Self::h_function) in its first argument.
    pub fn inv_h(&self, w: f64, v: f64) -> Result<f64> {
        check_open(w, v)?;
        self.h2_inv(w, v)
    }
}

impl fmt::Display for PairCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_independence() {
            write!(f, "independence")
        } else {
            write!(f, "{}({:.4})", self.family, self.theta)
        }
    }
}

fn check_open(u: f64, v: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("({u}, {v}) not in (0,1)^2")))
    }
}

fn check_closed(u: f64, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("({u}, {v}) not in [0,1]^2")))
    }
}
