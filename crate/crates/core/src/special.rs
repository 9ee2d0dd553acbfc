//! Standard normal special functions.
//!
//! `erfc` comes from `libm` (a port of the FreeBSD/musl implementation,
//! < 1 ulp), which keeps `Q` at roughly 1e-15 relative accuracy over the
//! whole real line until it underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF `Φ(x) = 1 − Q(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, stable in both tails.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        // Φ(x) = 1 − Q(x) with Q small: log1p avoids cancellation.
        (-q_function(x)).ln_1p()
    } else if x > -37.0 {
        normal_cdf(x).ln()
    } else {
        // Mills-ratio asymptotic; erfc underflows below here.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}
