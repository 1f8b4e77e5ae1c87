//! Per-direction estimation and the two decision rules.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::config::EstimationConfig;
use crate::ecm::ecm_fit;
use crate::error::{Error, Result};
use crate::hsic::hsic_test;
use crate::likelihood::{extract_residuals, observed_loglik, FitResult, ModelParams};
use crate::optim::tuning::{bayes_opt_penalties, fit_heuristic, perturbed_start};
use crate::seed::{derive_seed, rng_from_seed};
use crate::splines::{penalty_matrices, DesignPair};

/// Smallest sample accepted by [`fit_direction`].
pub const MIN_OBSERVATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "x->y")]
    XtoY,
    #[serde(rename = "y->x")]
    YtoX,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::XtoY => Direction::YtoX,
            Direction::YtoX => Direction::XtoY,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XtoY => "x->y",
            Direction::YtoX => "y->x",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Likelihood,
    Independence,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Likelihood => "likelihood",
            Rule::Independence => "independence",
        })
    }
}

/// `(v - mean) / sd` with the `n - 1` sample standard deviation.
pub fn standardize(v: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let n = v.len();
    if n < 2 {
        return Err(Error::Input(format!("cannot standardize {n} value(s)")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite value".into()));
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if !(sd > 0.0) || v.iter().all(|&x| x == v[0]) {
        return Err(Error::DegenerateInput("variable is constant".into()));
    }
    Ok((v.iter().map(|x| (x - mean) / sd).collect(), mean, sd))
}

/// Gaussian log-likelihood of a standardized sample, `-(n/2) ln(2 pi) - sum(x^2)/2`,
/// which equals `-(n/2) ln(2 pi) - (n-1)/2` for every standardized variable.
pub fn gaussian_marginal_term(standardized: &[f64]) -> f64 {
    let n = standardized.len() as f64;
    -0.5 * n * (2.0 * PI).ln() - 0.5 * standardized.iter().map(|x| x * x).sum::<f64>()
}

/// One fitted direction on standardized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionFit {
    pub direction: Direction,
    pub fit: FitResult,
    /// Equals `fit.loglik`: the conditional log-likelihood of effect given cause.
    pub conditional_loglik: f64,
    pub residual_pvalue: Option<f64>,
    /// CMA-ES estimate submitted to ECM.
    pub heuristic_theta: ModelParams,
    pub heuristic_loglik: f64,
    pub heuristic_residuals: Vec<f64>,
    /// Standardized cause.
    pub cause: Vec<f64>,
}

/// Penalty selection, multi-start CMA-ES heuristic, then ECM refinement for
/// the model `effect | cause`. Both inputs are standardized first.
pub fn fit_direction<R: Rng + ?Sized>(
    cause: &[f64],
    effect: &[f64],
    direction: Direction,
    config: &EstimationConfig,
    rng: &mut R,
) -> Result<DirectionFit> {
    config.validate()?;
    if cause.len() != effect.len() {
        return Err(Error::Dimension(format!("cause has {} points, effect has {}", cause.len(), effect.len())));
    }
    if cause.len() < MIN_OBSERVATIONS {
        return Err(Error::Input(format!("need at least {MIN_OBSERVATIONS} observations, got {}", cause.len())));
    }
    let (x, _, _) = standardize(cause)?;
    let (y, _, _) = standardize(effect)?;
    let (q, p) = (config.fit.q, config.fit.p);
    let design = DesignPair::from_cause(&x, q, p)?;
    let pen = penalty_matrices(q, p)?;

    let tuning = bayes_opt_penalties(&x, &y, &config.bo, &config.fit, rng)?;
    let penalties = tuning.penalties;
    let mut starts = tuning.warm_starts.clone();
    for i in 0..config.fit.extra_random_starts {
        let base = &tuning.warm_starts[i % tuning.warm_starts.len()];
        starts.push(perturbed_start(base, rng));
    }
    let (heuristic, _) = fit_heuristic(&y, &design, &penalties, &pen, &starts, &config.fit.cma, rng)?;
    let heuristic_loglik = observed_loglik(&heuristic, &y, &design)?;
    let heuristic_residuals = extract_residuals(&heuristic, &y, &design)?;
    let ecm = ecm_fit(&heuristic, &y, &design, &penalties, &pen, &config.ecm, rng)?;
    Ok(DirectionFit {
        direction,
        conditional_loglik: ecm.fit.loglik,
        fit: ecm.fit,
        residual_pvalue: None,
        heuristic_theta: heuristic,
        heuristic_loglik,
        heuristic_residuals,
        cause: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub inferred: Direction,
    pub rule: Rule,
    pub confidence: f64,
    /// Evidence was exactly equal; `inferred` defaults to `XtoY`.
    pub tie: bool,
    pub score_xy: f64,
    pub score_yx: f64,
}

fn decide(rule: Rule, xy: f64, yx: f64) -> Decision {
    let tie = xy == yx;
    let inferred = if xy >= yx { Direction::XtoY } else { Direction::YtoX };
    let confidence = if tie { 0.0 } else { (xy - yx).abs() };
    Decision { inferred, rule, confidence, tie, score_xy: xy, score_yx: yx }
}

fn ordered<'a>(a: &'a DirectionFit, b: &'a DirectionFit) -> Result<(&'a DirectionFit, &'a DirectionFit)> {
    match (a.direction, b.direction) {
        (Direction::XtoY, Direction::YtoX) => Ok((a, b)),
        (Direction::YtoX, Direction::XtoY) => Ok((b, a)),
        _ => Err(Error::Input("decision needs one fit per direction".into())),
    }
}

/// Infers the direction with the larger conditional log-likelihood. The
/// marginal terms of the standardized causes are equal and left out.
pub fn decide_likelihood(a: &DirectionFit, b: &DirectionFit) -> Result<Decision> {
    let (fx, fy) = ordered(a, b)?;
    Ok(decide(Rule::Likelihood, fx.conditional_loglik, fy.conditional_loglik))
}

/// HSIC p-value between cause and residuals in each direction.
pub fn residual_pvalue<R: Rng + ?Sized>(
    cause: &[f64],
    residuals: &[f64],
    config: &EstimationConfig,
    rng: &mut R,
) -> Result<f64> {
    Ok(hsic_test(cause, residuals, config.hsic_method, config.hsic_permutations, rng)?.p_value)
}

/// Infers the direction whose residuals look more independent of the cause
/// (larger HSIC p-value). Fills `residual_pvalue` on both fits.
pub fn decide_independence<R: Rng + ?Sized>(
    a: &mut DirectionFit,
    b: &mut DirectionFit,
    config: &EstimationConfig,
    rng: &mut R,
) -> Result<Decision> {
    for f in [&mut *a, &mut *b] {
        if f.residual_pvalue.is_none() {
            f.residual_pvalue = Some(residual_pvalue(&f.cause, &f.fit.residuals, config, rng)?);
        }
    }
    let (fx, fy) = ordered(a, b)?;
    Ok(decide(Rule::Independence, fx.residual_pvalue.unwrap_or(0.0), fy.residual_pvalue.unwrap_or(0.0)))
}

/// Independence rule applied to the CMA-ES heuristic residuals, skipping ECM.
pub fn decide_independence_heuristic<R: Rng + ?Sized>(
    a: &DirectionFit,
    b: &DirectionFit,
    config: &EstimationConfig,
    rng: &mut R,
) -> Result<Decision> {
    let (fx, fy) = ordered(a, b)?;
    let px = residual_pvalue(&fx.cause, &fx.heuristic_residuals, config, rng)?;
    let py = residual_pvalue(&fy.cause, &fy.heuristic_residuals, config, rng)?;
    Ok(decide(Rule::Independence, px, py))
}

fn fnv1a(data: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in data {
        for byte in v.to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Seed for fitting `effect | cause`. It depends on the data roles, not on
/// the argument order of [`fit_pair`], so swapping `x` and `y` reproduces
/// the same two fits.
pub fn direction_seed(seed: u64, cause: &[f64], effect: &[f64]) -> u64 {
    derive_seed(seed, fnv1a(cause) ^ fnv1a(effect).rotate_left(17))
}

/// Both direction fits plus the requested decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInference {
    pub xy: DirectionFit,
    pub yx: DirectionFit,
    pub likelihood: Option<Decision>,
    pub independence: Option<Decision>,
}

pub fn fit_pair(x: &[f64], y: &[f64], config: &EstimationConfig, seed: u64, parallel: bool) -> Result<(DirectionFit, DirectionFit)> {
    let fit_xy = || fit_direction(x, y, Direction::XtoY, config, &mut rng_from_seed(direction_seed(seed, x, y)));
    let fit_yx = || fit_direction(y, x, Direction::YtoX, config, &mut rng_from_seed(direction_seed(seed, y, x)));
    let (a, b) = if parallel { rayon::join(fit_xy, fit_yx) } else { (fit_xy(), fit_yx()) };
    Ok((a?, b?))
}

/// Fits both directions and applies the selected rules.
pub fn infer_pair(
    x: &[f64],
    y: &[f64],
    config: &EstimationConfig,
    seed: u64,
    likelihood: bool,
    independence: bool,
    parallel: bool,
) -> Result<PairInference> {
    let (mut xy, mut yx) = fit_pair(x, y, config, seed, parallel)?;
    let lik = if likelihood { Some(decide_likelihood(&xy, &yx)?) } else { None };
    let ind = if independence {
        let mut rng = rng_from_seed(derive_seed(seed, 0x4853_4943));
        Some(decide_independence(&mut xy, &mut yx, config, &mut rng)?)
    } else {
        None
    };
    Ok(PairInference { xy, yx, likelihood: lik, independence: ind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::PenaltyParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn standardize_hand_example() {
        let (s, m, sd) = standardize(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((sd - 2f64.sqrt()).abs() < 1e-15);
        assert!((s[0] + 0.5f64.sqrt()).abs() < 1e-15 && (s[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_is_idempotent_and_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..100).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect();
        let (s, _, _) = standardize(&v).unwrap();
        let (s2, _, _) = standardize(&s).unwrap();
        assert!(s.iter().zip(&s2).all(|(a, b)| (a - b).abs() < 1e-12));
        let w: Vec<f64> = v.iter().map(|x| -7.0 + 0.25 * x).collect();
        let (sw, _, _) = standardize(&w).unwrap();
        assert!(s.iter().zip(&sw).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!((s.iter().map(|x| x * x).sum::<f64>() - 99.0).abs() < 1e-9);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let (sn, _, _) = standardize(&neg).unwrap();
        assert!(s.iter().zip(&sn).all(|(a, b)| (a + b).abs() < 1e-12));
    }

    #[test]
    fn standardize_rejects_constant() {
        assert!(matches!(standardize(&[3.0; 10]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn marginal_term_depends_only_on_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        let (sa, _, _) = standardize(&a).unwrap();
        let (sb, _, _) = standardize(&b).unwrap();
        let expected = -100.0 * (2.0 * PI).ln() - 99.5;
        assert!((gaussian_marginal_term(&sa) - expected).abs() < 1e-9);
        assert!((gaussian_marginal_term(&sa) - gaussian_marginal_term(&sb)).abs() < 1e-9);
    }

    fn dummy(direction: Direction, ll: f64, p: Option<f64>) -> DirectionFit {
        let theta = ModelParams::zeros(4, 4);
        DirectionFit {
            direction,
            fit: FitResult {
                theta: theta.clone(),
                penalties: PenaltyParams { alpha: 1.0, kappa: 1.0 },
                loglik: ll,
                penalized_loglik: ll,
                residuals: vec![],
                ecm_iterations: 0,
                converged: true,
                jitter_used: false,
            },
            conditional_loglik: ll,
            residual_pvalue: p,
            heuristic_theta: theta,
            heuristic_loglik: ll,
            heuristic_residuals: vec![],
            cause: vec![],
        }
    }

    #[test]
    fn likelihood_rule_examples() {
        let d = decide_likelihood(&dummy(Direction::XtoY, -100.0, None), &dummy(Direction::YtoX, -120.0, None)).unwrap();
        assert_eq!((d.inferred, d.confidence, d.tie), (Direction::XtoY, 20.0, false));
        let d = decide_likelihood(&dummy(Direction::YtoX, -120.0, None), &dummy(Direction::XtoY, -100.0, None)).unwrap();
        assert_eq!((d.inferred, d.confidence), (Direction::XtoY, 20.0));
        let d = decide_likelihood(&dummy(Direction::XtoY, -5.0, None), &dummy(Direction::YtoX, -5.0, None)).unwrap();
        assert_eq!((d.inferred, d.confidence, d.tie), (Direction::XtoY, 0.0, true));
        assert!(decide_likelihood(&dummy(Direction::XtoY, 0.0, None), &dummy(Direction::XtoY, 0.0, None)).is_err());
    }

    #[test]
    fn independence_rule_examples() {
        let cfg = EstimationConfig::fast();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = dummy(Direction::XtoY, 0.0, Some(0.6));
        let mut b = dummy(Direction::YtoX, 0.0, Some(0.01));
        let d = decide_independence(&mut a, &mut b, &cfg, &mut rng).unwrap();
        assert_eq!(d.inferred, Direction::XtoY);
        assert!((d.confidence - 0.59).abs() < 1e-12);
        let mut a = dummy(Direction::XtoY, 0.0, Some(0.3));
        let mut b = dummy(Direction::YtoX, 0.0, Some(0.3));
        let d = decide_independence(&mut a, &mut b, &cfg, &mut rng).unwrap();
        assert!(d.tie && d.inferred == Direction::XtoY);
    }

    #[test]
    fn direction_seed_follows_roles() {
        let x = [1.0, 2.0, 3.0];
        let y = [0.5, 0.1, 0.2];
        assert_ne!(direction_seed(7, &x, &y), direction_seed(7, &y, &x));
        assert_eq!(direction_seed(7, &x, &y), direction_seed(7, &x, &y));
    }

    #[test]
    fn small_samples_are_rejected() {
        let v: Vec<f64> = (0..49).map(f64::from).collect();
        let w: Vec<f64> = v.iter().map(|x| x.sin()).collect();
        let r = fit_direction(&v, &w, Direction::XtoY, &EstimationConfig::fast(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Input(_))));
    }
}
