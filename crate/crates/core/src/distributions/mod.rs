//! Skew-normal and generalized-normal (GNO) noise laws.

pub mod normal;

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

pub use normal::{
    inverse_mills, std_normal_cdf, std_normal_log_cdf, std_normal_logpdf, std_normal_pdf,
    truncated_normal_moments,
};

/// `sqrt(2 / pi)`
pub const B_CONST: f64 = 0.797_884_560_802_865_4;

/// Mean, variance and skewness of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

/// `SN(xi, omega, lambda)` with density `(2/omega) phi(z) Phi(lambda z)`, `z = (x - xi)/omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    pub xi: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl SkewNormalParams {
    pub fn new(xi: f64, omega: f64, lambda: f64) -> Result<Self> {
        let p = Self { xi, omega, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(lambda: f64) -> Self {
        Self { xi: 0.0, omega: 1.0, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.omega.is_finite() && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("non-finite skew-normal parameters {self:?}")));
        }
        if self.omega <= 0.0 {
            return Err(Error::Parameter(format!("skew-normal scale must be positive, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.lambda / (1.0 + self.lambda * self.lambda).sqrt()
    }
}

/// `GNO(xi, alpha, k)`: a reparametrized three-parameter lognormal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnoParams {
    pub xi: f64,
    pub alpha: f64,
    pub k: f64,
}

impl GnoParams {
    pub fn new(xi: f64, alpha: f64, k: f64) -> Result<Self> {
        let p = Self { xi, alpha, k };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(k: f64) -> Self {
        Self { xi: 0.0, alpha: 1.0, k }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.alpha.is_finite() && self.k.is_finite()) {
            return Err(Error::Parameter(format!("non-finite GNO parameters {self:?}")));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Parameter(format!("GNO scale must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Finite end of the support, `xi + alpha / k`, when `k != 0`.
    pub fn support_bound(&self) -> Option<f64> {
        (self.k != 0.0).then(|| self.xi + self.alpha / self.k)
    }
}

pub fn sn_logpdf(x: f64, p: &SkewNormalParams) -> Result<f64> {
    p.validate()?;
    let z = (x - p.xi) / p.omega;
    Ok(LN_2 - p.omega.ln() + std_normal_logpdf(z) + std_normal_log_cdf(p.lambda * z))
}

/// Draws `xi + omega (delta |U0| + sqrt(1 - delta^2) U1)`.
pub fn sn_sample<R: Rng + ?Sized>(p: &SkewNormalParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    p.validate()?;
    let delta = p.delta();
    let tail = (1.0 - delta * delta).sqrt();
    Ok((0..n)
        .map(|_| {
            let u0: f64 = rng.sample(StandardNormal);
            let u1: f64 = rng.sample(StandardNormal);
            p.xi + p.omega * (delta * u0.abs() + tail * u1)
        })
        .collect())
}

pub fn sn_moments(p: &SkewNormalParams) -> Moments {
    let bd = B_CONST * p.delta();
    let tail = 1.0 - bd * bd;
    Moments {
        mean: p.xi + p.omega * bd,
        variance: p.omega * p.omega * tail,
        skewness: 0.5 * (4.0 - PI) * bd.powi(3) / tail.powf(1.5),
    }
}

/// Log-density of the GNO law; `-inf` outside the support.
pub fn gno_logpdf(x: f64, p: &GnoParams) -> Result<f64> {
    p.validate()?;
    let s = (x - p.xi) / p.alpha;
    let y = if p.k == 0.0 {
        s
    } else {
        let arg = 1.0 - p.k * s;
        if arg <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        -arg.ln() / p.k
    };
    Ok(-normal::LN_SQRT_2PI - p.alpha.ln() + p.k * y - 0.5 * y * y)
}

pub fn gno_moments(p: &GnoParams) -> Moments {
    let k = p.k;
    if k == 0.0 {
        return Moments { mean: p.xi, variance: p.alpha * p.alpha, skewness: 0.0 };
    }
    let k2 = k * k;
    let e = k2.exp();
    let em1 = k2.exp_m1();
    Moments {
        mean: p.xi - p.alpha / k * (0.5 * k2).exp_m1(),
        variance: p.alpha * p.alpha / k2 * e * em1,
        skewness: k.signum() * (3.0 * e - (3.0 * k2).exp() - 2.0) / em1.powf(1.5),
    }
}

/// Inverts the GNO transform: `x = xi + alpha (1 - exp(-k Z)) / k`, `Z ~ N(0, 1)`.
pub fn gno_sample<R: Rng + ?Sized>(p: &GnoParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    p.validate()?;
    Ok((0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if p.k == 0.0 {
                p.xi + p.alpha * z
            } else {
                p.xi - p.alpha * (-p.k * z).exp_m1() / p.k
            }
        })
        .collect())
}
