//! Hilbert-Schmidt independence criterion with Gaussian kernels.
//!
//! The statistic is the biased estimate `trace(K H L H) / n^2`. Bandwidths
//! follow the median heuristic. The null distribution of `n * HSIC` is either
//! approximated by a two-moment gamma fit or simulated by permuting `b`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};

/// Largest sample used for the median heuristic.
const MEDIAN_SUBSAMPLE: usize = 1000;
pub const DEFAULT_PERMUTATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HsicMethod {
    Gamma,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: HsicMethod,
    pub bandwidth_a: f64,
    pub bandwidth_b: f64,
}

/// Median pairwise distance, on an evenly spaced subsample for large inputs.
pub fn median_bandwidth(v: &[f64]) -> f64 {
    let n = v.len();
    let pts: Vec<f64> = if n > MEDIAN_SUBSAMPLE {
        (0..MEDIAN_SUBSAMPLE).map(|i| v[i * n / MEDIAN_SUBSAMPLE]).collect()
    } else {
        v.to_vec()
    };
    let mut d = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in 0..i {
            d.push((pts[i] - pts[j]).abs());
        }
    }
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    if med > 0.0 {
        med
    } else {
        // more than half of the pairs are ties
        let pos: Vec<f64> = d.into_iter().filter(|&x| x > 0.0).collect();
        pos.iter().sum::<f64>() / pos.len().max(1) as f64
    }
}

fn centered_gram(v: &[f64], bw: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = v.len();
    let s = 1.0 / (2.0 * bw * bw);
    let k = DMatrix::from_fn(n, n, |i, j| (-(v[i] - v[j]).powi(2) * s).exp());
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let kc = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand);
    (k, kc)
}

fn validate(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("inputs have lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 20 {
        return Err(Error::Input(format!("HSIC needs at least 20 points, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("HSIC inputs must be finite".into()));
    }
    for (name, v) in [("first", a), ("second", b)] {
        if v.iter().all(|&x| x == v[0]) {
            return Err(Error::DegenerateInput(format!("{name} HSIC input is constant")));
        }
    }
    Ok(())
}

fn off_diagonal_mean(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    (k.sum() - k.trace()) / (n * (n - 1)) as f64
}

fn gamma_p_value(n_stat: f64, k: &DMatrix<f64>, kc: &DMatrix<f64>, l: &DMatrix<f64>, lc: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let m = n as f64;
    let mut sum = 0.0;
    let mut diag = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = (kc[(i, j)] * lc[(i, j)] / 6.0).powi(2);
            sum += v;
            if i == j {
                diag += v;
            }
        }
    }
    let var = 72.0 * (m - 4.0) * (m - 5.0) / (m * (m - 1.0) * (m - 2.0) * (m - 3.0)) * (sum - diag) / (m * (m - 1.0));
    let (mu_k, mu_l) = (off_diagonal_mean(k), off_diagonal_mean(l));
    let mean = (1.0 + mu_k * mu_l - mu_k - mu_l) / m;
    if !(var > 0.0 && mean > 0.0) {
        return 1.0;
    }
    let shape = mean * mean / var;
    let scale = var * m / mean;
    match Gamma::new(shape, 1.0 / scale) {
        Ok(g) => g.sf(n_stat).clamp(0.0, 1.0),
        Err(_) => 1.0,
    }
}

fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Tests independence of the paired samples `a` and `b`.
pub fn hsic_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    method: HsicMethod,
    num_permutations: usize,
    rng: &mut R,
) -> Result<HsicResult> {
    validate(a, b)?;
    let n = a.len();
    let (bw_a, bw_b) = (median_bandwidth(a), median_bandwidth(b));
    let (k, kc) = centered_gram(a, bw_a);
    let (l, lc) = centered_gram(b, bw_b);
    let n_stat = frobenius(&kc, &lc) / n as f64;
    let statistic = (n_stat / n as f64).max(0.0);
    let p_value = match method {
        HsicMethod::Gamma => gamma_p_value(n_stat, &k, &kc, &l, &lc),
        HsicMethod::Permutation => {
            if num_permutations == 0 {
                return Err(Error::Config("permutation test needs at least one permutation".into()));
            }
            let observed = frobenius(&kc, &lc);
            let tol = 1e-12 * observed.abs().max(1e-300);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut exceed = 0usize;
            for _ in 0..num_permutations {
                perm.shuffle(rng);
                let mut s = 0.0;
                for j in 0..n {
                    let pj = perm[j];
                    for i in 0..n {
                        s += kc[(i, j)] * lc[(perm[i], pj)];
                    }
                }
                if s >= observed - tol {
                    exceed += 1;
                }
            }
            (1 + exceed) as f64 / (1 + num_permutations) as f64
        }
    };
    Ok(HsicResult { statistic, p_value, method, bandwidth_a: bw_a, bandwidth_b: bw_b })
}
