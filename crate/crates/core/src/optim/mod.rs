//! Derivative-free maximizers and the penalty-selection loop.

pub mod bayesopt;
pub mod cmaes;
pub mod gp;
pub mod lhs;
pub mod tuning;

pub use bayesopt::{bayes_opt_maximize, BayesOptConfig, BayesOptOutcome, Trial};
pub use cmaes::{cma_es_maximize, CmaConfig, CmaOutcome, CmaSettings};
pub use lhs::latin_hypercube;
pub use tuning::{bayes_opt_penalties, cv_heldout_loglik, fit_heuristic, heuristic_start, CvOutcome, FitConfig, TuningOutcome};
