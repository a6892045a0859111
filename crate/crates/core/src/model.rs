//! Covariance structure of fractional Brownian motion.
//!
//! Everything here is a pure function of its arguments: the covariance
//! `E[B_s B_t] = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`, the kernel
//! `H(2H - 1)|s - r|^{2H - 2}` of the Cameron-Martin inner product for
//! `H > 1/2`, the one- and two-time Gaussian densities and the four-term
//! correction function that removes the non-integrable part of
//! `1 / ((x - a)(y - b))` against the bivariate density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of a negative determinant factor that is still attributed
/// to rounding and clamped to zero.
pub const RHO2_CLAMP_TOL: f64 = 1e-12;

/// Roughness regime of a Hurst index relative to Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `H < 1/2`: negatively correlated increments.
    Sub,
    /// `H = 1/2`: standard Brownian motion.
    Brownian,
    /// `H > 1/2`: long memory.
    Super,
}

/// A validated Hurst index in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex {
    value: f64,
    regime: Regime,
}

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidHurst(value));
        }
        let regime = if value < 0.5 {
            Regime::Sub
        } else if value == 0.5 {
            Regime::Brownian
        } else {
            Regime::Super
        };
        Ok(Self { value, regime })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `2H`, the exponent of the variance `s^{2H}`.
    #[inline]
    pub fn two_h(&self) -> f64 {
        2.0 * self.value
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        if self.regime == regime {
            Ok(())
        } else {
            Err(Error::WrongRegime {
                required: match regime {
                    Regime::Sub => "H < 1/2",
                    Regime::Brownian => "H = 1/2",
                    Regime::Super => "H > 1/2",
                },
                hurst: self.value,
            })
        }
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.value
    }
}

/// `x^p` for `x >= 0` through `exp(p ln x)`, with `0^p` handled explicitly.
#[inline]
pub fn pow_nonneg(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        if p > 0.0 {
            0.0
        } else if p == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (p * x.ln()).exp()
    }
}

/// `E[B_s B_t]`.
pub fn covariance(h: HurstIndex, s: f64, t: f64) -> f64 {
    let p = h.two_h();
    0.5 * (pow_nonneg(t, p) + pow_nonneg(s, p) - pow_nonneg((t - s).abs(), p))
}

/// Second-order statistics of the pair `(B_s, B_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub hurst: HurstIndex,
    pub s: f64,
    pub r: f64,
    /// `E[B_s B_r]`.
    pub mu: f64,
    /// `(rs)^{2H} - mu^2`, the determinant of the covariance matrix.
    pub rho2: f64,
    /// `s^{2H}`.
    pub var_s: f64,
    /// `r^{2H}`.
    pub var_r: f64,
}

pub fn pair_stats(h: HurstIndex, s: f64, r: f64) -> Result<PairStats> {
    if !(s > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pair statistics need s, r > 0 (got s = {s}, r = {r})"
        )));
    }
    let p = h.two_h();
    let var_s = pow_nonneg(s, p);
    let var_r = pow_nonneg(r, p);
    let mu = covariance(h, s, r);
    let prod = var_s * var_r;
    let mut rho2 = prod - mu * mu;
    if rho2 < 0.0 {
        if rho2 > -RHO2_CLAMP_TOL * prod {
            rho2 = 0.0;
        } else {
            return Err(Error::Internal(format!(
                "negative determinant {rho2:e} for H = {}, s = {s}, r = {r}",
                h.value()
            )));
        }
    }
    Ok(PairStats {
        hurst: h,
        s,
        r,
        mu,
        rho2,
        var_s,
        var_r,
    })
}

impl PairStats {
    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.rho2 > 0.0 {
            Ok(())
        } else {
            Err(Error::DegeneratePair {
                s: self.s,
                r: self.r,
            })
        }
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho2.sqrt()
    }

    /// Quadratic form in the exponent of the bivariate density, without the
    /// `-1/2` factor.
    #[inline]
    fn quad_form(&self, x: f64, y: f64) -> f64 {
        (self.var_r * x * x - 2.0 * self.mu * x * y + self.var_s * y * y) / self.rho2
    }

    #[inline]
    fn norm_const(&self) -> f64 {
        1.0 / (2.0 * PI * self.rho())
    }

    /// Density without the degeneracy check; callers must have validated.
    #[inline]
    pub(crate) fn density_unchecked(&self, x: f64, y: f64) -> f64 {
        self.norm_const() * (-0.5 * self.quad_form(x, y)).exp()
    }

    /// `d/dx` of the bivariate density.
    pub fn density_dx(&self, x: f64, y: f64) -> f64 {
        -(self.var_r * x - self.mu * y) / self.rho2 * self.density_unchecked(x, y)
    }

    /// `d/dy` of the bivariate density.
    pub fn density_dy(&self, x: f64, y: f64) -> f64 {
        -(self.var_s * y - self.mu * x) / self.rho2 * self.density_unchecked(x, y)
    }

    /// Mixed partial `d^2/dxdy` of the bivariate density.
    pub fn density_dxdy(&self, x: f64, y: f64) -> f64 {
        let gx = (self.var_r * x - self.mu * y) / self.rho2;
        let gy = (self.var_s * y - self.mu * x) / self.rho2;
        (gx * gy + self.mu / self.rho2) * self.density_unchecked(x, y)
    }

    /// `phi(x, y) - phi(x, y0)` evaluated without catastrophic cancellation.
    pub(crate) fn density_diff_y(&self, x: f64, y: f64, y0: f64) -> f64 {
        let e0 = -0.5 * self.quad_form(x, y0);
        let e1 = -0.5 * self.quad_form(x, y);
        self.norm_const() * exp_diff(e1, e0)
    }

    /// `phi(x, y) - phi(x0, y)` evaluated without catastrophic cancellation.
    pub(crate) fn density_diff_x(&self, x: f64, x0: f64, y: f64) -> f64 {
        let e0 = -0.5 * self.quad_form(x0, y);
        let e1 = -0.5 * self.quad_form(x, y);
        self.norm_const() * exp_diff(e1, e0)
    }
}

/// `e^{e1} - e^{e0}`, factored around the larger exponent so that neither
/// factor overflows.
#[inline]
fn exp_diff(e1: f64, e0: f64) -> f64 {
    if e1 >= e0 {
        -e1.exp() * (e0 - e1).exp_m1()
    } else {
        e0.exp() * (e1 - e0).exp_m1()
    }
}

/// `H(2H - 1)|s - r|^{2H - 2}`; defined for `H > 1/2` off the diagonal.
pub fn phi_kernel(h: HurstIndex, s: f64, r: f64) -> Result<f64> {
    h.require(Regime::Super)?;
    if s == r {
        return Err(Error::SingularDiagonal(s));
    }
    let hv = h.value();
    Ok(hv * (2.0 * hv - 1.0) * pow_nonneg((s - r).abs(), 2.0 * hv - 2.0))
}

/// Density of `B_s`, a centred Gaussian with variance `s^{2H}`.
pub fn marginal_density(h: HurstIndex, s: f64, x: f64) -> f64 {
    let var = pow_nonneg(s, h.two_h());
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

/// Density of `(B_s, B_r)` at `(x, y)`.
pub fn pair_density(stats: &PairStats, x: f64, y: f64) -> Result<f64> {
    stats.require_nondegenerate()?;
    Ok(stats.density_unchecked(x, y))
}

#[inline]
fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The correction function
/// `phi(x,y) - phi(x,b)θ(1+b-y) - phi(a,y)θ(1+a-x) + phi(a,b)θ(1+a-x)θ(1+b-y)`
/// with `θ = 1_{(0, ∞)}`.
pub fn psi_correction(stats: &PairStats, a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    stats.require_nondegenerate()?;
    let tx = theta(1.0 + a - x);
    let ty = theta(1.0 + b - y);
    let d = |u: f64, v: f64| stats.density_unchecked(u, v);
    Ok(d(x, y) - d(x, b) * ty - d(a, y) * tx + d(a, b) * tx * ty)
}
