//! Standard normal building blocks with tail-stable evaluation.
//!
//! The lower tail is handled through the Laplace continued fraction for the
//! Mills ratio `R(t) = Phi(-t) / phi(t)`:
//!
//! ```text
//! R(t) = 1 / (t + 1 / (t + 2 / (t + 3 / (t + ...))))
//! ```
//!
//! Writing `R(t) = 1 / (t + c(t))`, the inverse Mills ratio at `u = -t` is
//! `t + c(t)` and the truncated-normal mean offset `u + W(u)` is exactly
//! `c(t)`, which avoids the cancellation of the naive form.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the continued fraction replaces `phi / Phi`.
const LOWER_TAIL: f64 = -6.0;

pub fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_logpdf(u: f64) -> f64 {
    -0.5 * u * u - LN_SQRT_2PI
}

/// `Phi(u)` through `erfc`, accurate in both tails.
pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u * FRAC_1_SQRT_2)
}

/// `ln Phi(u)`, finite for every finite `u`.
pub fn std_normal_log_cdf(u: f64) -> f64 {
    if u > 0.0 {
        (-0.5 * erfc(u * FRAC_1_SQRT_2)).ln_1p()
    } else if u >= LOWER_TAIL {
        (0.5 * erfc(-u * FRAC_1_SQRT_2)).ln()
    } else {
        let t = -u;
        std_normal_logpdf(u) - (t + mills_tail(t)).ln()
    }
}

/// Tail term `c(t)` of the Mills-ratio continued fraction, `t > 0`.
///
/// Evaluated bottom-up with a fixed depth; at `t >= 6` two hundred levels
/// converge far below machine precision.
fn mills_tail(t: f64) -> f64 {
    const DEPTH: usize = 200;
    let mut acc = 0.0;
    for j in (2..=DEPTH).rev() {
        acc = j as f64 / (t + acc);
    }
    1.0 / (t + acc)
}

/// Inverse Mills ratio `W(u) = phi(u) / Phi(u)`.
///
/// Strictly positive and decreasing; behaves like `-u` as `u -> -inf`.
pub fn inverse_mills(u: f64) -> f64 {
    if u < LOWER_TAIL {
        let t = -u;
        t + mills_tail(t)
    } else {
        std_normal_pdf(u) / std_normal_cdf(u)
    }
}

/// `u + W(u)`, the mean of a standard normal truncated to `(-u, inf)`
/// shifted back by `u`. Stable for very negative `u`.
fn shifted_mills(u: f64) -> f64 {
    if u < LOWER_TAIL {
        mills_tail(-u)
    } else {
        u + inverse_mills(u)
    }
}

/// First and second raw moments of `N(mu, sigma2)` truncated to `(0, inf)`.
///
/// `m1 = mu + sigma W(mu / sigma)` and
/// `m2 = mu^2 + sigma^2 + mu sigma W(mu / sigma)`.
pub fn truncated_normal_moments(mu: f64, sigma2: f64) -> (f64, f64) {
    debug_assert!(sigma2 > 0.0);
    let sigma = sigma2.sqrt();
    let a = mu / sigma;
    let s = shifted_mills(a);
    let m1 = sigma * s;
    let m2 = sigma2 * (1.0 + a * s);
    (m1, m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_mills_at_zero() {
        assert_relative_eq!(inverse_mills(0.0), (2.0 / PI).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn inverse_mills_upper_tail() {
        // mpmath: npdf(10)/ncdf(10) at 50 digits
        assert_relative_eq!(inverse_mills(10.0), 7.694_598_626_706_419e-23, max_relative = 1e-12);
    }

    #[test]
    fn inverse_mills_deep_lower_tail() {
        // Asymptotic series W(-t) = t + 1/t - 2/t^3 + 10/t^5 - 74/t^7 + ...
        let t: f64 = 30.0;
        let series = t + 1.0 / t - 2.0 / t.powi(3) + 10.0 / t.powi(5) - 74.0 / t.powi(7)
            + 706.0 / t.powi(9);
        assert_relative_eq!(inverse_mills(-30.0), series, max_relative = 1e-12);
        assert_relative_eq!(inverse_mills(-30.0), 30.033_259_667_433_677, max_relative = 1e-13);
    }

    #[test]
    fn inverse_mills_identity_and_monotone() {
        let mut prev = f64::INFINITY;
        for i in 0..=1600 {
            let u = -8.0 + i as f64 * 0.01;
            let w = inverse_mills(u);
            assert!(w > 0.0 && w < prev, "u={u}");
            prev = w;
            let rel = (w * std_normal_cdf(u) - std_normal_pdf(u)).abs() / std_normal_pdf(u);
            assert!(rel < 1e-10, "u={u} rel={rel}");
        }
    }

    #[test]
    fn log_cdf_continuous_across_branches() {
        for &b in &[LOWER_TAIL, 0.0] {
            let lo = std_normal_log_cdf(b - 1e-9);
            let hi = std_normal_log_cdf(b + 1e-9);
            assert!((lo - hi).abs() < 1e-7, "branch at {b}");
        }
        // mpmath: log(ncdf(-40))
        assert_relative_eq!(std_normal_log_cdf(-40.0), -804.608_442_013_754_3, max_relative = 1e-14);
        assert!(std_normal_log_cdf(-1e4).is_finite());
        assert_eq!(std_normal_log_cdf(40.0), 0.0);
    }

    #[test]
    fn half_normal_moments() {
        let (m1, m2) = truncated_normal_moments(0.0, 1.0);
        assert_relative_eq!(m1, (2.0 / PI).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m2, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn deep_truncation_is_stable() {
        let (m1, m2) = truncated_normal_moments(-5.0, 1.0);
        // mpmath quadrature of the truncated density
        assert_relative_eq!(m1, 0.186_503_967_125_842_1, max_relative = 1e-12);
        assert!(m2 > 0.0);
        let (m1, m2) = truncated_normal_moments(-300.0, 1.0);
        assert!(m1 > 0.0 && m2 > 0.0 && m2 >= m1 * m1);
    }
}
