//! Bayesian optimization over a box: Latin hypercube design followed by
//! sequential expected-improvement acquisitions on a Gaussian-process
//! surrogate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gp::GaussianProcess;
use super::lhs::latin_hypercube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesOptConfig {
    /// Cross-validation folds used to score a candidate.
    pub folds: usize,
    pub lhs_candidates: usize,
    pub ei_candidates: usize,
    /// Box for `(ln alpha, ln kappa)`.
    pub log_range: [(f64, f64); 2],
    /// Random points scored by the acquisition function per step.
    pub acquisition_samples: usize,
}

impl Default for BayesOptConfig {
    fn default() -> Self {
        Self { folds: 8, lhs_candidates: 40, ei_candidates: 20, log_range: [(-4.0, 4.0); 2], acquisition_samples: 2000 }
    }
}

impl BayesOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.lhs_candidates == 0 {
            return Err(Error::Config("need at least one initial candidate".into()));
        }
        if self.acquisition_samples == 0 && self.ei_candidates > 0 {
            return Err(Error::Config("acquisition needs candidate samples".into()));
        }
        if self.log_range.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Config("log range must be finite with lo < hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub point: Vec<f64>,
    pub score: f64,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesOptOutcome<T> {
    pub trials: Vec<Trial<T>>,
    pub best: usize,
}

impl<T> BayesOptOutcome<T> {
    pub fn best_trial(&self) -> &Trial<T> {
        &self.trials[self.best]
    }
}

fn best_index<T>(trials: &[Trial<T>]) -> usize {
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score {
            best = i;
        }
    }
    best
}

/// Maximizes `objective` over `ranges` with `n_init` space-filling points
/// followed by up to `n_ei` acquisitions. The objective returns a score
/// (non-finite scores are treated as the worst observed) and a payload kept
/// with the trial.
///
/// When every score is equal the surrogate is uninformative and the search
/// stops early, returning the first best observation.
pub fn bayes_opt_maximize<T, F, R>(
    mut objective: F,
    ranges: &[(f64, f64)],
    n_init: usize,
    n_ei: usize,
    acquisition_samples: usize,
    rng: &mut R,
) -> Result<BayesOptOutcome<T>>
where
    F: FnMut(&[f64]) -> Result<(f64, T)>,
    R: Rng + ?Sized,
{
    let mut trials = Vec::with_capacity(n_init + n_ei);
    for point in latin_hypercube(n_init, ranges, rng)? {
        let (score, payload) = objective(&point)?;
        trials.push(Trial { point, score, payload });
    }
    for _ in 0..n_ei {
        let finite: Vec<f64> = trials.iter().map(|t| t.score).filter(|s| s.is_finite()).collect();
        let Some(floor) = finite.iter().copied().reduce(f64::min) else {
            break;
        };
        let xs: Vec<Vec<f64>> = trials.iter().map(|t| t.point.clone()).collect();
        let ys: Vec<f64> = trials.iter().map(|t| if t.score.is_finite() { t.score } else { floor }).collect();
        let gp = match GaussianProcess::fit(&xs, &ys, ranges) {
            Ok(gp) => gp,
            Err(Error::DegenerateInput(_)) => break,
            Err(e) => return Err(e),
        };
        let incumbent = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut next: Option<(f64, Vec<f64>)> = None;
        for _ in 0..acquisition_samples {
            let cand: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let ei = gp.expected_improvement(&cand, incumbent);
            if next.as_ref().is_none_or(|(b, _)| ei > *b) {
                next = Some((ei, cand));
            }
        }
        let Some((_, point)) = next else { break };
        let (score, payload) = objective(&point)?;
        trials.push(Trial { point, score, payload });
    }
    let best = best_index(&trials);
    Ok(BayesOptOutcome { trials, best })
}
