//! Penalty selection by cross-validated held-out likelihood and the
//! CMA-ES heuristic fit of the penalized likelihood.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bayesopt::{bayes_opt_maximize, BayesOptConfig};
use super::cmaes::{cma_es_maximize, CmaConfig, CmaSettings};
use crate::error::{Error, Result};
use crate::likelihood::{observed_loglik_unchecked, ModelParams, PenaltyParams, LAMBDA_BOUNDS, RHO_BOUNDS};
use crate::linalg::solve_spd;
use crate::seed::{derive_seed, rng_from_seed};
use crate::splines::{penalty_matrices, DesignBases, DesignPair, PenaltySpec};

/// Budgets for the heuristic penalized-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub q: usize,
    pub p: usize,
    /// Final multi-start fit on the full data.
    pub cma: CmaSettings,
    /// Inner fits on training folds during penalty selection.
    pub cv_cma: CmaSettings,
    /// Additional randomly perturbed starts for the final fit.
    pub extra_random_starts: usize,
}

/// Box constraints in the packed `(psi, rho, lambda)` layout.
pub fn theta_bounds(q: usize, p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::NEG_INFINITY; q];
    let mut hi = vec![f64::INFINITY; q];
    lo.extend(std::iter::repeat_n(RHO_BOUNDS.0, p));
    hi.extend(std::iter::repeat_n(RHO_BOUNDS.1, p));
    lo.push(LAMBDA_BOUNDS.0);
    hi.push(LAMBDA_BOUNDS.1);
    (lo, hi)
}

/// Penalized least-squares location, constant log-variance at the residual
/// variance, and `lambda = 0`.
pub fn heuristic_start(y: &[f64], design: &DesignPair, penalties: &PenaltyParams, pen: &PenaltySpec) -> Result<ModelParams> {
    let ones = vec![1.0; y.len()];
    let a = design.location.weighted_gram(&ones) + penalties.alpha * &pen.k;
    let b = design.location.weighted_tmul(&ones, y);
    let (psi, _) = solve_spd(a, &b)?;
    let psi: Vec<f64> = psi.iter().copied().collect();
    let fitted = design.location.mul_vec(&psi);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let level = (rss / y.len() as f64).max(1e-300).ln().clamp(RHO_BOUNDS.0, RHO_BOUNDS.1);
    Ok(ModelParams { psi, rho: vec![level; design.p()], lambda: 0.0 })
}

pub(crate) fn penalized_objective<'a>(
    y: &'a [f64],
    design: &'a DesignPair,
    penalties: PenaltyParams,
    pen: &'a PenaltySpec,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    let (q, p) = (design.q(), design.p());
    move |v: &[f64]| {
        let (psi, rest) = v.split_at(q);
        let (rho, lambda) = rest.split_at(p);
        observed_loglik_unchecked(psi, rho, lambda[0], y, design)
            - 0.5 * penalties.alpha * pen.location_penalty(psi)
            - 0.5 * penalties.kappa * pen.scale_penalty(rho)
    }
}

/// Runs CMA-ES on the penalized likelihood from each start and returns the
/// best point with its penalized log-likelihood.
pub fn fit_heuristic<R: Rng + ?Sized>(
    y: &[f64],
    design: &DesignPair,
    penalties: &PenaltyParams,
    pen: &PenaltySpec,
    starts: &[ModelParams],
    settings: &CmaSettings,
    rng: &mut R,
) -> Result<(ModelParams, f64)> {
    if starts.is_empty() {
        return Err(Error::Input("heuristic fit needs at least one start".into()));
    }
    let (q, p) = (design.q(), design.p());
    let (lo, hi) = theta_bounds(q, p);
    let config = CmaConfig::with_bounds(*settings, lo, hi);
    let objective = penalized_objective(y, design, *penalties, pen);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        start.check(design)?;
        let out = cma_es_maximize(&objective, &start.to_vec(), &config, rng)?;
        if best.as_ref().is_none_or(|(_, f)| out.f_best > *f) {
            best = Some((out.x_best, out.f_best));
        }
    }
    let (x, f) = best.expect("at least one start");
    Ok((ModelParams::from_slice(&x, q, p)?, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Mean over folds of the held-out log-likelihood per point.
    pub score: f64,
    /// Estimate trained on each fold's complement.
    pub fold_thetas: Vec<ModelParams>,
}

/// `k`-fold cross-validated held-out log-likelihood of a penalty setting.
/// Spline bases are built on the training part; held-out points outside its
/// range use the linear extrapolation of the basis.
#[allow(clippy::too_many_arguments)]
pub fn cv_heldout_loglik<R: Rng + ?Sized>(
    cause: &[f64],
    effect: &[f64],
    penalties: &PenaltyParams,
    folds: usize,
    q: usize,
    p: usize,
    settings: &CmaSettings,
    rng: &mut R,
) -> Result<CvOutcome> {
    let n = cause.len();
    if effect.len() != n {
        return Err(Error::Dimension(format!("cause has {n} points, effect has {}", effect.len())));
    }
    if folds < 2 || n < 2 * folds {
        return Err(Error::Config(format!("{folds} folds need at least {} points, got {n}", 2 * folds.max(2))));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let fold_seed: u64 = rng.random();
    let pen = penalty_matrices(q, p)?;
    let mut total = 0.0;
    let mut fold_thetas = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (pos, &i) in order.iter().enumerate() {
            if pos % folds == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        train.sort_unstable();
        test.sort_unstable();
        let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let (xtr, ytr) = (pick(cause, &train), pick(effect, &train));
        let (xte, yte) = (pick(cause, &test), pick(effect, &test));
        let bases = DesignBases::fit(&xtr, q, p)?;
        let dtr = bases.design(&xtr)?;
        let start = heuristic_start(&ytr, &dtr, penalties, &pen)?;
        let mut frng = rng_from_seed(derive_seed(fold_seed, f as u64));
        let (theta, _) = fit_heuristic(&ytr, &dtr, penalties, &pen, &[start], settings, &mut frng)?;
        let dte = bases.evaluate(&xte);
        total += observed_loglik_unchecked(&theta.psi, &theta.rho, theta.lambda, &yte, &dte) / yte.len() as f64;
        fold_thetas.push(theta);
    }
    Ok(CvOutcome { score: total / folds as f64, fold_thetas })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub penalties: PenaltyParams,
    pub cv_score: f64,
    /// Fold estimates at the selected penalties.
    pub warm_starts: Vec<ModelParams>,
    /// Every evaluated `(penalties, score)` in evaluation order.
    pub trials: Vec<(PenaltyParams, f64)>,
}

/// Selects `(alpha, kappa)` by Bayesian optimization of the cross-validated
/// held-out log-likelihood over `(ln alpha, ln kappa)`.
pub fn bayes_opt_penalties<R: Rng + ?Sized>(
    cause: &[f64],
    effect: &[f64],
    bo: &BayesOptConfig,
    fit: &FitConfig,
    rng: &mut R,
) -> Result<TuningOutcome> {
    bo.validate()?;
    let cv_seed: u64 = rng.random();
    let mut counter = 0u64;
    let objective = |x: &[f64]| -> Result<(f64, Vec<ModelParams>)> {
        let penalties = PenaltyParams::from_log(x[0], x[1]);
        let mut crng = rng_from_seed(derive_seed(cv_seed, counter));
        counter += 1;
        let cv = cv_heldout_loglik(cause, effect, &penalties, bo.folds, fit.q, fit.p, &fit.cv_cma, &mut crng)?;
        Ok((cv.score, cv.fold_thetas))
    };
    let out = bayes_opt_maximize(objective, &bo.log_range, bo.lhs_candidates, bo.ei_candidates, bo.acquisition_samples, rng)?;
    let best = out.best_trial();
    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    let penalties = PenaltyParams::from_log(clamp(best.point[0], bo.log_range[0]), clamp(best.point[1], bo.log_range[1]));
    Ok(TuningOutcome {
        penalties,
        cv_score: best.score,
        warm_starts: best.payload.clone(),
        trials: out.trials.iter().map(|t| (PenaltyParams::from_log(t.point[0], t.point[1]), t.score)).collect(),
    })
}

/// Random perturbation of `base` used for optional extra starts.
pub(crate) fn perturbed_start<R: Rng + ?Sized>(base: &ModelParams, rng: &mut R) -> ModelParams {
    let mut v = DVector::from_vec(base.to_vec());
    for x in v.iter_mut() {
        *x += rng.sample::<f64, _>(StandardNormal);
    }
    let (q, p) = (base.psi.len(), base.rho.len());
    let (lo, hi) = theta_bounds(q, p);
    let clipped: Vec<f64> = v.iter().zip(lo.iter().zip(&hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect();
    ModelParams::from_slice(&clipped, q, p).expect("layout preserved")
}
