//! Log-domain scalar helpers.
//!
//! Transcendentals go through `libm` so the crate stays `no_std`.

use crate::error::Error;
use crate::Result;
use alloc::format;

pub const LOG_PI: f64 = 1.144_729_885_849_400_2;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + ln_1p(exp(b - a))
    } else {
        b + ln_1p(exp(a - b))
    }
}

/// `log(sum_i exp(x_i))` with a single max shift; fixed summation order.
pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &x in xs {
        acc += exp(x - max);
    }
    max + ln(acc)
}

/// `log(1 - exp(x))` for `x <= 0`.
pub fn log1mexp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x > -core::f64::consts::LN_2 {
        ln(-expm1(x))
    } else {
        ln_1p(-exp(x))
    }
}

/// `log Gamma_d(x)`, the multivariate gamma function.
///
/// `log Gamma_d(x) = d(d-1)/4 * log(pi) + sum_{j=1..d} log Gamma(x - (j-1)/2)`,
/// defined for `x > (d-1)/2`.
pub fn log_multivariate_gamma(d: usize, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter {
            context: format!("multivariate gamma dimension must be >= 1"),
        });
    }
    let pole = (d as f64 - 1.0) / 2.0;
    if !(x > pole) {
        return Err(Error::InvalidParameter {
            context: format!("multivariate gamma pole: x = {x} <= (d-1)/2 = {pole}"),
        });
    }
    let mut acc = (d * (d - 1)) as f64 / 4.0 * LOG_PI;
    for j in 1..=d {
        acc += ln_gamma(x - (j as f64 - 1.0) / 2.0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        let v = log_sum_exp(1000.0, 1000.0);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        // against the naive computation in a safe range
        let naive = (0.3f64.exp() + (-1.2f64).exp()).ln();
        assert!((log_sum_exp(0.3, -1.2) - naive).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_slice_matches_pairwise() {
        let xs = [0.1, -3.0, 2.5, 1.0];
        let mut acc = f64::NEG_INFINITY;
        for &x in &xs {
            acc = log_sum_exp(acc, x);
        }
        assert!((log_sum_exp_slice(&xs) - acc).abs() < 1e-12);
        assert_eq!(log_sum_exp_slice(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log1mexp_complements() {
        for &lp in &[-0.01, -0.5, -2.0, -40.0] {
            let q = log1mexp(lp);
            assert!((exp(q) + exp(lp) - 1.0).abs() < 1e-12);
        }
    }

    // Gamma_1(1) = Gamma(1) = 1.
    #[test]
    fn multivariate_gamma_d1() {
        assert!(log_multivariate_gamma(1, 1.0).unwrap().abs() < 1e-14);
    }

    // Gamma_2(1.5) = sqrt(pi) * Gamma(1.5) * Gamma(1) = pi/2.
    #[test]
    fn multivariate_gamma_d2_analytic() {
        let v = log_multivariate_gamma(2, 1.5).unwrap();
        assert!((v - ln(core::f64::consts::PI / 2.0)).abs() < 1e-12);
    }

    // d = 3 against the direct product of univariate gammas.
    #[test]
    fn multivariate_gamma_d3_product() {
        let x = 4.0;
        let direct = 3.0 * (2.0 / 4.0) * LOG_PI
            + ln_gamma(x)
            + ln_gamma(x - 0.5)
            + ln_gamma(x - 1.0);
        let v = log_multivariate_gamma(3, x).unwrap();
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn multivariate_gamma_pole_rejected() {
        assert!(log_multivariate_gamma(3, 1.0).is_err());
        assert!(log_multivariate_gamma(1, 0.0).is_err());
    }
}
