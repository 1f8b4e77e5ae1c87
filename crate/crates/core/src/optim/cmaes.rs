//! (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation, written as a maximizer.
//!
//! Box constraints are handled by clipping each candidate coordinate-wise
//! before it is evaluated; the clipped candidate also enters the mean and
//! covariance updates, so the mean never leaves the box.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Dimension-free strategy settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmaSettings {
    pub population: usize,
    pub initial_step: f64,
    pub max_iters: usize,
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Evaluate each generation on the rayon pool.
    pub parallel: bool,
}

impl Default for CmaSettings {
    fn default() -> Self {
        Self { population: 100, initial_step: 1.0, max_iters: 5000, stall_window: 25, stall_tol: 1e-6, parallel: false }
    }
}

/// Settings plus per-coordinate bounds (`+-inf` for free coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct CmaConfig {
    pub settings: CmaSettings,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CmaConfig {
    pub fn unbounded(settings: CmaSettings, dim: usize) -> Self {
        Self { settings, lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn with_bounds(settings: CmaSettings, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { settings, lower, upper }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let s = &self.settings;
        if s.population < 4 {
            return Err(Error::Config(format!("population must be >= 4, got {}", s.population)));
        }
        if !(s.initial_step > 0.0 && s.initial_step.is_finite()) {
            return Err(Error::Config(format!("initial step must be positive, got {}", s.initial_step)));
        }
        if s.stall_window == 0 {
            return Err(Error::Config("stall window must be positive".into()));
        }
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::Dimension(format!("bounds do not match dimension {dim}")));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
        Ok(())
    }

    fn clip(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best-so-far value after each generation.
    pub trace: Vec<f64>,
    /// Stopped by the stall criterion rather than the iteration cap.
    pub stalled: bool,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() || v == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `objective` starting from `x0`.
///
/// Returns the best evaluated point, which is never worse than the clipped
/// start. Non-finite candidate values count as `-inf`.
pub fn cma_es_maximize<F, R>(objective: F, x0: &[f64], config: &CmaConfig, rng: &mut R) -> Result<CmaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Input("empty start vector".into()));
    }
    config.validate(n)?;
    let s = config.settings;

    let mut start = x0.to_vec();
    config.clip(&mut start);
    let f0 = objective(&start);
    if !f0.is_finite() {
        return Err(Error::Input(format!("objective is not finite at the start point ({f0})")));
    }

    let nf = n as f64;
    let lambda = s.population;
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
    let eigen_gap = ((1.0 / ((c1 + cmu) * nf * 10.0)).floor() as usize).max(1);

    let mut mean = DVector::from_vec(start.clone());
    let mut sigma = s.initial_step;
    let mut pc = DVector::zeros(n);
    let mut ps = DVector::zeros(n);
    let mut cov = DMatrix::identity(n, n);
    let mut basis = DMatrix::identity(n, n);
    let mut diag = DVector::from_element(n, 1.0);
    let mut inv_sqrt = DMatrix::identity(n, n);
    let mut last_eigen = 0usize;

    let mut x_best = start;
    let mut f_best = f0;
    let mut evaluations = 1usize;
    let mut trace = Vec::new();
    let mut history: VecDeque<DVector<f64>> = VecDeque::with_capacity(s.stall_window + 1);
    history.push_back(mean.clone());
    let mut stalled = false;
    let mut iterations = 0usize;

    let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; n]; lambda];
    for gen in 1..=s.max_iters {
        iterations = gen;
        for cand in candidates.iter_mut() {
            let z: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y: DVector<f64> = &basis * diag.component_mul(&z);
            for j in 0..n {
                cand[j] = mean[j] + sigma * y[j];
            }
            config.clip(cand);
        }
        let fitness: Vec<f64> = if s.parallel {
            candidates.par_iter().map(|c| eval(&objective, c)).collect()
        } else {
            candidates.iter().map(|c| eval(&objective, c)).collect()
        };
        evaluations += lambda;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
        if fitness[order[0]] > f_best {
            f_best = fitness[order[0]];
            x_best.copy_from_slice(&candidates[order[0]]);
        }
        trace.push(f_best);

        let old_mean = mean.clone();
        mean.fill(0.0);
        for (w, &idx) in weights.iter().zip(&order) {
            for j in 0..n {
                mean[j] += w * candidates[idx][j];
            }
        }
        let step = (&mean - &old_mean) / sigma;

        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt * &step);
        let ps_norm = ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * gen as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + hs * (cc * (2.0 - cc) * mueff).sqrt() * &step;

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &idx) in weights.iter().zip(&order) {
            let d = (DVector::from_column_slice(&candidates[idx]) - &old_mean) / sigma;
            rank_mu.ger(*w, &d, &d, 1.0);
        }
        cov = (1.0 - c1 - cmu) * &cov
            + c1 * (&pc * pc.transpose() + (1.0 - hs) * cc * (2.0 - cc) * &cov)
            + cmu * rank_mu;

        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();
        if !sigma.is_finite() || sigma < 1e-300 {
            break;
        }

        if gen - last_eigen >= eigen_gap {
            last_eigen = gen;
            cov = 0.5 * (&cov + cov.transpose());
            let eig = cov.clone().symmetric_eigen();
            let min_ev = eig.eigenvalues.min();
            let max_ev = eig.eigenvalues.max();
            if !(min_ev > 0.0) || max_ev / min_ev > 1e14 {
                break;
            }
            basis = eig.eigenvectors;
            diag = eig.eigenvalues.map(f64::sqrt);
            inv_sqrt = &basis * DMatrix::from_diagonal(&diag.map(|d| 1.0 / d)) * basis.transpose();
        }

        history.push_back(mean.clone());
        if history.len() > s.stall_window {
            let old = history.pop_front().expect("history is non-empty");
            if (&mean - old).norm() < s.stall_tol {
                stalled = true;
                break;
            }
        }
    }

    Ok(CmaOutcome { x_best, f_best, iterations, evaluations, trace, stalled })
}
