//! Expectation conditional maximization for the skew-normal location-scale
//! model. Each observation carries a latent `V_i` such that
//! `V_i | y_i ~ N(lambda e_i, omega_i^2)` truncated to `(0, inf)`, where
//! `e_i = y_i - n_i^T psi` and `omega_i^2 = exp(z_i^T rho)`.
//!
//! One iteration: conditional moments of the latent variables (E-step),
//! closed-form update of `(psi, lambda)` with `rho` fixed (CM-step 1), then a
//! CMA-ES maximization of the Q-function in `rho` (CM-step 2).

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::truncated_normal_moments;
use crate::error::{Error, Result};
use crate::likelihood::{
    extract_residuals, log_variance, observed_loglik, penalty_term, FitResult, ModelParams, PenaltyParams,
    LAMBDA_BOUNDS, RHO_BOUNDS,
};
use crate::linalg::solve_spd;
use crate::optim::cmaes::{cma_es_maximize, CmaConfig, CmaSettings};
use crate::splines::{DesignPair, PenaltySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmConfig {
    pub max_iters: usize,
    /// Stop once `||theta^(k+1) - theta^(k)||_2` falls below this.
    pub tol: f64,
    /// Inner CMA-ES for CM-step 2.
    pub cma: CmaSettings,
    /// Update `lambda` from the new `psi` instead of the previous one.
    pub lambda_from_new_psi: bool,
    /// Caps the iterations at `budget / n` when set.
    pub work_budget: Option<f64>,
}

impl Default for EcmConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-6,
            cma: CmaSettings { population: 10, initial_step: 0.3, max_iters: 100, ..CmaSettings::default() },
            lambda_from_new_psi: false,
            work_budget: None,
        }
    }
}

impl EcmConfig {
    pub fn iteration_cap(&self, n: usize) -> usize {
        match self.work_budget {
            Some(b) if b.is_finite() => self.max_iters.min((b / n as f64).floor().max(1.0) as usize),
            _ => self.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmState {
    pub theta: ModelParams,
    pub v_hat: Vec<f64>,
    pub v2_hat: Vec<f64>,
    pub iteration: usize,
    pub last_penalized_loglik: f64,
}

fn residual(y: &[f64], design: &DesignPair, psi: &[f64], i: usize) -> f64 {
    y[i] - design.location.row_dot(i, psi)
}

/// Conditional first and second moments of the latent half-normal variables.
pub fn e_step(theta: &ModelParams, y: &[f64], design: &DesignPair) -> Result<(Vec<f64>, Vec<f64>)> {
    theta.check(design)?;
    if y.len() != design.n() {
        return Err(Error::Dimension(format!("y has {} points, design has {}", y.len(), design.n())));
    }
    let (v1, v2) = (0..y.len())
        .map(|i| {
            let e = residual(y, design, &theta.psi, i);
            let omega2 = log_variance(design, &theta.rho, i).exp();
            truncated_normal_moments(theta.lambda * e, omega2)
        })
        .unzip();
    Ok((v1, v2))
}

fn weights(design: &DesignPair, rho: &[f64]) -> Vec<f64> {
    (0..design.n()).map(|i| (-log_variance(design, rho, i)).exp()).collect()
}

/// Maximizer of the Q-function in `lambda` for fixed `(psi, rho)`, clamped to
/// [`LAMBDA_BOUNDS`].
fn lambda_update(y: &[f64], design: &DesignPair, psi: &[f64], h: &[f64], v1: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        let e = residual(y, design, psi, i);
        num += h[i] * e * v1[i];
        den += h[i] * e * e;
    }
    if den > 0.0 {
        (num / den).clamp(LAMBDA_BOUNDS.0, LAMBDA_BOUNDS.1)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmStep1 {
    pub psi: Vec<f64>,
    pub lambda: f64,
    pub jitter_used: bool,
}

/// Closed-form update of `(psi, lambda)` with `rho` held at its current value.
/// `lambda` is computed from the incoming `psi` unless `from_new_psi` is set.
#[allow(clippy::too_many_arguments)]
pub fn cm_step1(
    theta: &ModelParams,
    y: &[f64],
    design: &DesignPair,
    v_hat: &[f64],
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
    from_new_psi: bool,
) -> Result<CmStep1> {
    theta.check(design)?;
    let h = weights(design, &theta.rho);
    let l = theta.lambda;
    let shrink = l / (1.0 + l * l);
    let target: Vec<f64> = y.iter().zip(v_hat).map(|(yi, vi)| yi - shrink * vi).collect();
    let a = design.location.weighted_gram(&h) + (penalties.alpha / (1.0 + l * l)) * &pen.k;
    let b: DVector<f64> = design.location.weighted_tmul(&h, &target);
    let (psi, jitter_used) = solve_spd(a, &b)?;
    let psi: Vec<f64> = psi.iter().copied().collect();
    let lambda = if from_new_psi {
        lambda_update(y, design, &psi, &h, v_hat)
    } else {
        lambda_update(y, design, &theta.psi, &h, v_hat)
    };
    Ok(CmStep1 { psi, lambda, jitter_used })
}

/// Penalized Q-function in `rho` for fixed `(psi, lambda)`, given the
/// per-point coefficients `c_i = E[(V - lambda e_i)^2 | y] + e_i^2`.
fn q_rho(rho: &[f64], c: &[f64], design: &DesignPair, kappa: f64, pen: &PenaltySpec) -> f64 {
    let mut acc = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        let eta = log_variance(design, rho, i);
        acc += -eta - 0.5 * (-eta).exp() * ci;
    }
    acc - 0.5 * kappa * pen.scale_penalty(rho)
}

fn rho_coefficients(y: &[f64], design: &DesignPair, psi: &[f64], lambda: f64, v1: &[f64], v2: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let e = residual(y, design, psi, i);
            v2[i] - 2.0 * lambda * e * v1[i] + (1.0 + lambda * lambda) * e * e
        })
        .collect()
}

/// CMA-ES maximization of the penalized Q-function in `rho`, started at
/// `rho_k`. The candidate is kept only if it does not lower the objective.
#[allow(clippy::too_many_arguments)]
pub fn cm_step2<R: Rng + ?Sized>(
    psi: &[f64],
    lambda: f64,
    rho_k: &[f64],
    y: &[f64],
    design: &DesignPair,
    v_hat: &[f64],
    v2_hat: &[f64],
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
    settings: &CmaSettings,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p = design.p();
    if rho_k.len() != p {
        return Err(Error::Dimension(format!("rho has length {}, expected {p}", rho_k.len())));
    }
    let c = rho_coefficients(y, design, psi, lambda, v_hat, v2_hat);
    let objective = |rho: &[f64]| q_rho(rho, &c, design, penalties.kappa, pen);
    let start: Vec<f64> = rho_k.iter().map(|r| r.clamp(RHO_BOUNDS.0, RHO_BOUNDS.1)).collect();
    let f0 = objective(&start);
    let config = CmaConfig::with_bounds(*settings, vec![RHO_BOUNDS.0; p], vec![RHO_BOUNDS.1; p]);
    let out = cma_es_maximize(objective, &start, &config, rng)?;
    Ok(if out.f_best > f0 { out.x_best } else { rho_k.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmOutcome {
    pub fit: FitResult,
    /// Penalized observed log-likelihood at `theta^(0), theta^(1), ...`.
    pub trace: Vec<f64>,
}

fn penalized(theta: &ModelParams, y: &[f64], design: &DesignPair, penalties: &PenaltyParams, pen: &PenaltySpec) -> Result<f64> {
    Ok(observed_loglik(theta, y, design)? - penalty_term(theta, penalties, pen))
}

fn q_penalized_at(
    psi: &[f64],
    lambda: f64,
    rho: &[f64],
    h: &[f64],
    y: &[f64],
    design: &DesignPair,
    v1: &[f64],
    v2: &[f64],
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let e = residual(y, design, psi, i);
        acc += -log_variance(design, rho, i) - 0.5 * h[i] * v2[i] + lambda * e * h[i] * v1[i]
            - 0.5 * (1.0 + lambda * lambda) * e * e * h[i];
    }
    acc - 0.5 * penalties.alpha * pen.location_penalty(psi) - 0.5 * penalties.kappa * pen.scale_penalty(rho)
}

/// Runs ECM from `theta0` until the parameter change drops below the
/// tolerance or the iteration cap is reached.
///
/// If the `lambda` update based on the previous `psi` would lower the
/// penalized Q-function, `lambda` is recomputed from the new `psi`, which
/// makes CM-step 1 an ascent step and the penalized likelihood trace
/// non-decreasing.
#[allow(clippy::too_many_arguments)]
pub fn ecm_fit<R: Rng + ?Sized>(
    theta0: &ModelParams,
    y: &[f64],
    design: &DesignPair,
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
    config: &EcmConfig,
    rng: &mut R,
) -> Result<EcmOutcome> {
    theta0.check(design)?;
    if !theta0.is_finite() {
        return Err(Error::Input("initial parameters are not finite".into()));
    }
    let mut theta = theta0.clone();
    theta.rho.iter_mut().for_each(|r| *r = r.clamp(RHO_BOUNDS.0, RHO_BOUNDS.1));
    theta.lambda = theta.lambda.clamp(LAMBDA_BOUNDS.0, LAMBDA_BOUNDS.1);
    let mut lp = penalized(&theta, y, design, penalties, pen)?;
    if !lp.is_finite() {
        return Err(Error::Input(format!("penalized log-likelihood is not finite at the start ({lp})")));
    }
    let mut trace = vec![lp];
    let cap = config.iteration_cap(y.len());
    let mut jitter_used = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let (v1, v2) = e_step(&theta, y, design)?;
        let step1 = cm_step1(&theta, y, design, &v1, penalties, pen, config.lambda_from_new_psi)?;
        jitter_used |= step1.jitter_used;
        let mut lambda = step1.lambda;
        if !config.lambda_from_new_psi {
            let h = weights(design, &theta.rho);
            let before = q_penalized_at(&theta.psi, theta.lambda, &theta.rho, &h, y, design, &v1, &v2, penalties, pen);
            let after = q_penalized_at(&step1.psi, lambda, &theta.rho, &h, y, design, &v1, &v2, penalties, pen);
            if after < before {
                lambda = lambda_update(y, design, &step1.psi, &h, &v1);
            }
        }
        let rho = cm_step2(&step1.psi, lambda, &theta.rho, y, design, &v1, &v2, penalties, pen, &config.cma, rng)?;
        let next = ModelParams { psi: step1.psi, rho, lambda };
        let next_lp = penalized(&next, y, design, penalties, pen)?;
        let change = next.distance(&theta);
        theta = next;
        lp = next_lp;
        trace.push(lp);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let loglik = observed_loglik(&theta, y, design)?;
    let residuals = extract_residuals(&theta, y, design)?;
    Ok(EcmOutcome {
        fit: FitResult {
            theta,
            penalties: *penalties,
            loglik,
            penalized_loglik: lp,
            residuals,
            ecm_iterations: iterations,
            converged,
            jitter_used,
        },
        trace,
    })
}
