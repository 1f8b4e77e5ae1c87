use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive (semi-)definite `A` by Cholesky.
/// If the factorization fails, a ridge `c * 1e-10 * trace(A) / dim` is added
/// with `c` growing tenfold per attempt. The flag reports whether a ridge was
/// needed.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok((x, false));
        }
    }
    let dim = a.nrows();
    let base = (a.trace() / dim as f64).abs().max(f64::MIN_POSITIVE);
    let mut ridge = 1e-10 * base;
    for _ in 0..14 {
        let mut aj = a.clone();
        for i in 0..dim {
            aj[(i, i)] += ridge;
        }
        if let Some(ch) = Cholesky::new(aj) {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, true));
            }
        }
        ridge *= 10.0;
    }
    Err(Error::Construction("system is not positive definite even after ridge regularization".into()))
}
