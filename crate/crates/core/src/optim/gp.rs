//! Gaussian-process surrogate with constant mean and an ARD Matérn-5/2
//! kernel. Observations are standardized; the signal variance and the mean
//! are profiled out and the lengthscales are chosen on a log grid by the
//! marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::distributions::{std_normal_cdf, std_normal_pdf};
use crate::error::{Error, Result};

const JITTER: f64 = 1e-6;
const LENGTHSCALE_GRID: [f64; 8] = [0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 2.0, 5.0];

fn matern52(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    let r = (5.0 * r2).sqrt();
    (1.0 + r + r * r / 3.0) * (-r).exp()
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    /// Lengthscales in units of the input ranges.
    lengthscales: Vec<f64>,
    scale: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    mean: f64,
    signal_var: f64,
    y_mean: f64,
    y_sd: f64,
}

struct Fitted {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    mean: f64,
    signal_var: f64,
    log_ml: f64,
}

fn fit_fixed(x: &[Vec<f64>], y: &DVector<f64>, ls: &[f64]) -> Option<Fitted> {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| matern52(&x[i], &x[j], ls) + if i == j { JITTER } else { 0.0 });
    let chol = Cholesky::new(k)?;
    let ones = DVector::from_element(n, 1.0);
    let ki_one = chol.solve(&ones);
    let ki_y = chol.solve(y);
    let mean = ki_y.sum() / ki_one.sum();
    let centered = y - DVector::from_element(n, mean);
    let alpha = chol.solve(&centered);
    let signal_var = (centered.dot(&alpha) / n as f64).max(1e-12);
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let log_ml = -0.5 * n as f64 * signal_var.ln() - 0.5 * log_det;
    Some(Fitted { chol, alpha, mean, signal_var, log_ml })
}

impl GaussianProcess {
    /// Fits to points `x` inside the box `ranges` with scores `y`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], ranges: &[(f64, f64)]) -> Result<Self> {
        let n = x.len();
        if n == 0 || y.len() != n {
            return Err(Error::Dimension(format!("{} points and {} scores", n, y.len())));
        }
        let d = ranges.len();
        if x.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension("point dimension does not match ranges".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("surrogate scores must be finite".into()));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let y_sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if !(y_sd > 0.0) {
            return Err(Error::DegenerateInput("all surrogate scores are equal".into()));
        }
        let scale: Vec<f64> = ranges.iter().map(|(lo, hi)| hi - lo).collect();
        let xs: Vec<Vec<f64>> = x.iter().map(|p| p.iter().zip(&scale).map(|(v, s)| v / s).collect()).collect();
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_sd));

        let mut best: Option<(Vec<f64>, Fitted)> = None;
        let mut idx = vec![0usize; d];
        loop {
            let ls: Vec<f64> = idx.iter().map(|&i| LENGTHSCALE_GRID[i]).collect();
            if let Some(f) = fit_fixed(&xs, &ys, &ls) {
                if best.as_ref().is_none_or(|(_, b)| f.log_ml > b.log_ml) {
                    best = Some((ls, f));
                }
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < LENGTHSCALE_GRID.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        let (lengthscales, f) = best.ok_or_else(|| Error::Construction("surrogate covariance is singular".into()))?;
        Ok(Self {
            x: xs,
            lengthscales,
            scale,
            chol: f.chol,
            alpha: f.alpha,
            mean: f.mean,
            signal_var: f.signal_var,
            y_mean,
            y_sd,
        })
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().zip(&self.scale).map(|(l, s)| l * s).collect()
    }

    /// Posterior mean and standard deviation on the original score scale.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let p: Vec<f64> = point.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(xi, &p, &self.lengthscales)));
        let mu = self.mean + k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (self.signal_var * (1.0 + JITTER - k.dot(&v))).max(0.0);
        (self.y_mean + self.y_sd * mu, self.y_sd * var.sqrt())
    }

    /// Expected improvement over `best` for maximization.
    pub fn expected_improvement(&self, point: &[f64], best: f64) -> f64 {
        let (mu, sd) = self.predict(point);
        expected_improvement(mu, sd, best)
    }
}

pub fn expected_improvement(mu: f64, sd: f64, best: f64) -> f64 {
    if sd <= 0.0 {
        return (mu - best).max(0.0);
    }
    let z = (mu - best) / sd;
    (mu - best) * std_normal_cdf(z) + sd * std_normal_pdf(z)
}
