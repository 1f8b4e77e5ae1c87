//! Latin hypercube sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws `n` points in the box `ranges`; each coordinate hits every one of
/// its `n` equal strata exactly once.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, ranges: &[(f64, f64)], rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Config("latin hypercube needs at least one point".into()));
    }
    if ranges.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::Config("latin hypercube ranges must be finite with lo < hi".into()));
    }
    let mut out = vec![vec![0.0; ranges.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (d, &(lo, hi)) in ranges.iter().enumerate() {
        strata.shuffle(rng);
        let width = (hi - lo) / n as f64;
        for (row, &s) in out.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            row[d] = (lo + (s as f64 + u) * width).min(hi);
        }
    }
    Ok(out)
}
