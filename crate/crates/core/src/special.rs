//! Gaussian special functions.
//!
//! `erfc` is the FreeBSD `s_erf.c` rational approximation as ported by the
//! `libm` crate (below 1 ulp over the whole real line). Everything else here
//! is expressed through it so that tails keep full relative accuracy.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Gaussian tail probability `Q(x) = P[Z > x]` for standard normal `Z`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF `Φ(x) = 1 − Q(x)`.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}
