//! Parameters and likelihood quantities of the skew-normal location-scale
//! model `y_i = n_i^T psi + exp(0.5 z_i^T rho) e_i`, `e_i ~ SN(0, 1, lambda)`.
//!
//! The weight matrix `H = diag(exp(-z_i^T rho))` is never formed; every
//! product with it is an elementwise weighting.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distributions::{inverse_mills, std_normal_log_cdf, std_normal_logpdf};
use crate::error::{Error, Result};
use crate::splines::{DesignPair, PenaltySpec};

/// Box for the scale coefficients.
pub const RHO_BOUNDS: (f64, f64) = (-10.0, 5.0);
/// Box for the shape parameter.
pub const LAMBDA_BOUNDS: (f64, f64) = (-25.0, 25.0);

/// `theta = (psi^T, rho^T, lambda)^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
    pub lambda: f64,
}

impl ModelParams {
    pub fn zeros(q: usize, p: usize) -> Self {
        Self { psi: vec![0.0; q], rho: vec![0.0; p], lambda: 0.0 }
    }

    /// Packs into the fixed `(psi, rho, lambda)` layout.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.psi.len() + self.rho.len() + 1);
        v.extend_from_slice(&self.psi);
        v.extend_from_slice(&self.rho);
        v.push(self.lambda);
        v
    }

    pub fn from_slice(v: &[f64], q: usize, p: usize) -> Result<Self> {
        if v.len() != q + p + 1 {
            return Err(Error::Dimension(format!("theta has length {}, expected {}", v.len(), q + p + 1)));
        }
        Ok(Self { psi: v[..q].to_vec(), rho: v[q..q + p].to_vec(), lambda: v[q + p] })
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().chain(&self.rho).all(|v| v.is_finite()) && self.lambda.is_finite()
    }

    /// Euclidean distance in the packed layout.
    pub fn distance(&self, other: &Self) -> f64 {
        let d2: f64 = self.psi.iter().zip(&other.psi).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + self.rho.iter().zip(&other.rho).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + (self.lambda - other.lambda).powi(2);
        d2.sqrt()
    }

    pub(crate) fn check(&self, design: &DesignPair) -> Result<()> {
        if self.psi.len() != design.q() || self.rho.len() != design.p() {
            return Err(Error::Dimension(format!(
                "theta has (q, p) = ({}, {}), design has ({}, {})",
                self.psi.len(),
                self.rho.len(),
                design.q(),
                design.p()
            )));
        }
        Ok(())
    }
}

/// Roughness weights `(alpha, kappa)`, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub alpha: f64,
    pub kappa: f64,
}

impl PenaltyParams {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && kappa > 0.0 && alpha.is_finite() && kappa.is_finite()) {
            return Err(Error::Parameter(format!("penalties must be positive, got ({alpha}, {kappa})")));
        }
        Ok(Self { alpha, kappa })
    }

    pub fn from_log(log_alpha: f64, log_kappa: f64) -> Self {
        Self { alpha: log_alpha.exp(), kappa: log_kappa.exp() }
    }
}

/// Outcome of one fitted direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: ModelParams,
    pub penalties: PenaltyParams,
    /// Unpenalized observed log-likelihood.
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub residuals: Vec<f64>,
    pub ecm_iterations: usize,
    pub converged: bool,
    /// CM-step 1 needed ridge jitter at least once.
    pub jitter_used: bool,
}

fn check_len(name: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::Dimension(format!("{name} has length {got}, design has {n} rows")));
    }
    Ok(())
}

/// `z_i^T rho` with `rho` clamped to [`RHO_BOUNDS`].
#[inline]
pub(crate) fn log_variance(design: &DesignPair, rho: &[f64], i: usize) -> f64 {
    let (s, v) = design.scale.row(i);
    let c = |j: usize| rho[s + j].clamp(RHO_BOUNDS.0, RHO_BOUNDS.1);
    v[0] * c(0) + v[1] * c(1) + v[2] * c(2) + v[3] * c(3)
}

/// Returns `(f_hat, g_hat) = (N psi, exp(0.5 Z rho))`.
pub fn predict(theta: &ModelParams, design: &DesignPair) -> Result<(Vec<f64>, Vec<f64>)> {
    theta.check(design)?;
    let f = design.location.mul_vec(&theta.psi);
    let g = (0..design.n()).map(|i| (0.5 * log_variance(design, &theta.rho, i)).exp()).collect();
    Ok((f, g))
}

/// Observed log-likelihood without shape checks; used by the optimizers.
pub(crate) fn observed_loglik_unchecked(psi: &[f64], rho: &[f64], lambda: f64, y: &[f64], design: &DesignPair) -> f64 {
    let n = y.len();
    let mut acc = 0.5 * n as f64 * (2.0 / PI).ln();
    for (i, &yi) in y.iter().enumerate() {
        let eta = log_variance(design, rho, i);
        let r = (yi - design.location.row_dot(i, psi)) * (-0.5 * eta).exp();
        acc += -0.5 * eta - 0.5 * r * r + std_normal_log_cdf(lambda * r);
    }
    acc
}

/// Per-observation log-density terms; they sum to [`observed_loglik`].
pub fn pointwise_loglik(theta: &ModelParams, y: &[f64], design: &DesignPair) -> Result<Vec<f64>> {
    theta.check(design)?;
    check_len("y", y.len(), design.n())?;
    let c = 0.5 * (2.0 / PI).ln();
    Ok(y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let eta = log_variance(design, &theta.rho, i);
            let r = (yi - design.location.row_dot(i, &theta.psi)) * (-0.5 * eta).exp();
            c - 0.5 * eta - 0.5 * r * r + std_normal_log_cdf(theta.lambda * r)
        })
        .collect())
}

pub fn observed_loglik(theta: &ModelParams, y: &[f64], design: &DesignPair) -> Result<f64> {
    theta.check(design)?;
    check_len("y", y.len(), design.n())?;
    Ok(observed_loglik_unchecked(&theta.psi, &theta.rho, theta.lambda, y, design))
}

/// `(alpha/2) psi^T K psi + (kappa/2) rho^T M rho`
pub fn penalty_term(theta: &ModelParams, penalties: &PenaltyParams, pen: &PenaltySpec) -> f64 {
    0.5 * penalties.alpha * pen.location_penalty(&theta.psi) + 0.5 * penalties.kappa * pen.scale_penalty(&theta.rho)
}

pub fn penalized_loglik(
    theta: &ModelParams,
    y: &[f64],
    design: &DesignPair,
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
) -> Result<f64> {
    Ok(observed_loglik(theta, y, design)? - penalty_term(theta, penalties, pen))
}

/// Analytic gradient of [`penalized_loglik`] in the packed `(psi, rho, lambda)` layout.
pub fn penalized_loglik_gradient(
    theta: &ModelParams,
    y: &[f64],
    design: &DesignPair,
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
) -> Result<Vec<f64>> {
    theta.check(design)?;
    check_len("y", y.len(), design.n())?;
    let (q, p) = (design.q(), design.p());
    let l = theta.lambda;
    let mut grad = vec![0.0; q + p + 1];
    for (i, &yi) in y.iter().enumerate() {
        let eta = log_variance(design, &theta.rho, i);
        let inv_omega = (-0.5 * eta).exp();
        let r = (yi - design.location.row_dot(i, &theta.psi)) * inv_omega;
        let w = inverse_mills(l * r);
        // d l_i / d r
        let dr = -r + l * w;
        let (s, v) = design.location.row(i);
        for a in 0..4 {
            grad[s + a] -= dr * v[a] * inv_omega;
        }
        let (s, v) = design.scale.row(i);
        let deta = -0.5 - 0.5 * dr * r;
        for a in 0..4 {
            let j = s + a;
            if theta.rho[j] > RHO_BOUNDS.0 && theta.rho[j] < RHO_BOUNDS.1 {
                grad[q + j] += deta * v[a];
            }
        }
        grad[q + p] += r * w;
    }
    let kpsi = &pen.k * nalgebra::DVector::from_column_slice(&theta.psi);
    let mrho = &pen.m * nalgebra::DVector::from_column_slice(&theta.rho);
    for j in 0..q {
        grad[j] -= penalties.alpha * kpsi[j];
    }
    for j in 0..p {
        grad[q + j] -= penalties.kappa * mrho[j];
    }
    Ok(grad)
}

/// Joint log-likelihood of `y` and the latent `v`.
pub fn complete_data_loglik(theta: &ModelParams, y: &[f64], v: &[f64], design: &DesignPair) -> Result<f64> {
    theta.check(design)?;
    check_len("y", y.len(), design.n())?;
    check_len("v", v.len(), design.n())?;
    let n = y.len() as f64;
    let l = theta.lambda;
    let mut acc = -n * PI.ln();
    for i in 0..y.len() {
        let eta = log_variance(design, &theta.rho, i);
        let h = (-eta).exp();
        let e = y[i] - design.location.row_dot(i, &theta.psi);
        acc += -eta + l * e * v[i] * h - 0.5 * (1.0 + l * l) * e * e * h - 0.5 * v[i] * v[i] * h;
    }
    Ok(acc)
}

/// Q-function given conditional moments `v1 = E[V|y]`, `v2 = E[V^2|y]`,
/// with the constant `-n ln(pi)` dropped.
pub fn q_function(theta: &ModelParams, y: &[f64], design: &DesignPair, v1: &[f64], v2: &[f64]) -> Result<f64> {
    theta.check(design)?;
    check_len("y", y.len(), design.n())?;
    check_len("v_hat", v1.len(), design.n())?;
    check_len("v2_hat", v2.len(), design.n())?;
    let l = theta.lambda;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let eta = log_variance(design, &theta.rho, i);
        let h = (-eta).exp();
        let e = y[i] - design.location.row_dot(i, &theta.psi);
        acc += -eta - 0.5 * h * v2[i] + l * e * h * v1[i] - 0.5 * (1.0 + l * l) * e * e * h;
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
pub fn q_penalized(
    theta: &ModelParams,
    y: &[f64],
    design: &DesignPair,
    v1: &[f64],
    v2: &[f64],
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
) -> Result<f64> {
    Ok(q_function(theta, y, design, v1, v2)? - penalty_term(theta, penalties, pen))
}

/// Standardized noise `(effect - N psi) / exp(0.5 Z rho)`.
pub fn extract_residuals(theta: &ModelParams, effect: &[f64], design: &DesignPair) -> Result<Vec<f64>> {
    theta.check(design)?;
    check_len("effect", effect.len(), design.n())?;
    Ok(effect
        .iter()
        .enumerate()
        .map(|(i, &yi)| (yi - design.location.row_dot(i, &theta.psi)) * (-0.5 * log_variance(design, &theta.rho, i)).exp())
        .collect())
}

/// Gaussian log-density of `y` under `N(f, g^2)`, used only for cross-checks.
pub fn gaussian_loglik(y: &[f64], f: &[f64], g: &[f64]) -> f64 {
    y.iter()
        .zip(f)
        .zip(g)
        .map(|((&yi, &fi), &gi)| std_normal_logpdf((yi - fi) / gi) - gi.ln())
        .sum()
}
