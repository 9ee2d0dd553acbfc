//! Closed-form bounds: measurement count and RIP probability, the MSE bound
//! for small RICs, achievable delay, and the large/moderate-deviation tail
//! exponents of the restricted eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::spectra::{beta_from_delta, xi, RestrictedSpectrum};

/// RIC below which the ℓ₁ decoder's error bound applies.
pub const RIC_LIMIT: f64 = 0.307;

/// The universal constants `c₁`, `c₂` of the measurement bound. They are
/// never instantiated analytically, so absolute values are "up to `c₁`".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

impl BoundConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let c = BoundConstants { c1, c2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite() {
            Ok(())
        } else {
            Err(param(format!("bound constants must be positive, got c1 = {}, c2 = {}", self.c1, self.c2)))
        }
    }
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { c1: 1.0, c2: 1.0 }
    }
}

fn check_spectrum(spectrum: &RestrictedSpectrum) -> Result<()> {
    if !(spectrum.rho_min > 0.0) || spectrum.rho_min > spectrum.rho_max {
        return Err(param(format!(
            "restricted eigenvalues must satisfy 0 < rho_min <= rho_max, got ({}, {})",
            spectrum.rho_max, spectrum.rho_min
        )));
    }
    Ok(())
}

/// `c₁ k ρ_max / (p² β² ρ_min) · ln(5en/k)`; the caller takes the ceiling.
pub fn measurement_bound(
    k: usize,
    n: usize,
    p: f64,
    beta_k: f64,
    spectrum: &RestrictedSpectrum,
    constants: &BoundConstants,
) -> Result<f64> {
    if !(beta_k > 0.0 && beta_k < 1.0) {
        return Err(param(format!("modified RIC must lie in (0, 1), got {beta_k}")));
    }
    if k == 0 || n == 0 || !(p > 0.0 && p <= 1.0) {
        return Err(param("measurement bound needs k, n >= 1 and p in (0, 1]"));
    }
    check_spectrum(spectrum)?;
    constants.validate()?;
    let log_term = (5.0 * std::f64::consts::E * n as f64 / k as f64).ln();
    Ok(constants.c1 * k as f64 * spectrum.ratio / (p * p * beta_k * beta_k) * log_term)
}

/// `1 − exp(−c₂ m p² β² / 4)`.
pub fn rip_probability(m: f64, p: f64, beta_k: f64, constants: &BoundConstants) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(param(format!("measurement count must be >= 1, got {m}")));
    }
    constants.validate()?;
    Ok(-(-constants.c2 * m * p * p * beta_k * beta_k / 4.0).exp_m1())
}

/// `1 / (SNR_ave (0.307 − δ)²)`.
pub fn mse_upper_bound(delta_k: f64, snr_ave: f64) -> Result<f64> {
    if !(delta_k < RIC_LIMIT) {
        return Err(Error::InfeasibleRic(format!("the MSE bound needs delta < {RIC_LIMIT}, got {delta_k}")));
    }
    if !(snr_ave > 0.0) {
        return Err(param("average SNR must be positive"));
    }
    let gap = RIC_LIMIT - delta_k;
    Ok(1.0 / (snr_ave * gap * gap))
}

/// Smallest allowable MSE with a finite delay, `1 / (0.307² SNR_ave)`.
pub fn mse_threshold(snr_ave: f64) -> f64 {
    1.0 / (RIC_LIMIT * RIC_LIMIT * snr_ave)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayQuery {
    pub epsilon: f64,
    pub snr_ave: f64,
    pub spectrum: RestrictedSpectrum,
    pub k: usize,
    pub n: usize,
    pub p: f64,
    pub constants: BoundConstants,
}

/// Intermediate quantities of the delay evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayEvaluation {
    /// Infinite when no RIC meets the MSE target.
    pub delay: f64,
    pub epsilon_th: f64,
    /// `δ* = 0.307 − 1/√(ε SNR_ave)`, when `ε > ε_th`.
    pub delta_star: Option<f64>,
    pub beta_tilde: Option<f64>,
}

/// `δ*` mapped through the modified-RIC branch selected by its interval;
/// `None` when `δ* ≤ ξ` (the inhomogeneity alone exceeds the RIC budget).
pub fn beta_tilde(epsilon: f64, snr_ave: f64, spectrum: &RestrictedSpectrum) -> Option<f64> {
    let delta_star = RIC_LIMIT - 1.0 / (epsilon * snr_ave).sqrt();
    beta_from_delta(spectrum.rho_max, spectrum.rho_min, delta_star)
}

pub fn achievable_delay_detail(query: &DelayQuery) -> Result<DelayEvaluation> {
    if !(query.epsilon > 0.0) || !(query.snr_ave > 0.0) {
        return Err(param("allowable MSE and SNR must be positive"));
    }
    check_spectrum(&query.spectrum)?;
    let epsilon_th = mse_threshold(query.snr_ave);
    let infinite = DelayEvaluation { delay: f64::INFINITY, epsilon_th, delta_star: None, beta_tilde: None };
    if query.epsilon <= epsilon_th {
        return Ok(infinite);
    }
    let delta_star = RIC_LIMIT - 1.0 / (query.epsilon * query.snr_ave).sqrt();
    if delta_star <= xi(query.spectrum.rho_max, query.spectrum.rho_min) {
        return Ok(DelayEvaluation { delta_star: Some(delta_star), ..infinite });
    }
    let Some(beta) = beta_tilde(query.epsilon, query.snr_ave, &query.spectrum) else {
        return Ok(DelayEvaluation { delta_star: Some(delta_star), ..infinite });
    };
    let delay = measurement_bound(query.k, query.n, query.p, beta, &query.spectrum, &query.constants)?;
    Ok(DelayEvaluation { delay, epsilon_th, delta_star: Some(delta_star), beta_tilde: Some(beta) })
}

/// Achievable delay `D(ε)`; infinite for `ε ≤ ε_th` or when `δ* ≤ ξ`.
pub fn achievable_delay(query: &DelayQuery) -> Result<f64> {
    achievable_delay_detail(query).map(|d| d.delay)
}

/// Large-deviation rate `E(k, t) = t / (k − 1 + √2 t)`.
pub fn ld_exponent(k: usize, t: f64) -> f64 {
    t / (k as f64 - 1.0 + std::f64::consts::SQRT_2 * t)
}

/// `−n d² E(k, t)²`, the log of the asymptotic tail bound.
pub fn ld_log_tail_bound(k: usize, t: f64, d: f64, n: usize) -> f64 {
    let e = ld_exponent(k, t);
    -(n as f64) * d * d * e * e
}

/// `exp(−n d² E(k, t)²)`: an asymptotic exponent for
/// `P(ρ_max(k, n) > 1 + t)`, not a finite-`n` certificate.
pub fn ld_tail_bound(k: usize, t: f64, d: f64, n: usize) -> f64 {
    ld_log_tail_bound(k, t, d, n).exp()
}

/// Sparsity `⌊n^{1/2 − λ}⌋` of the growing-`k` regime.
pub fn moderate_deviation_sparsity(n: usize, lambda: f64) -> usize {
    (n as f64).powf(0.5 - lambda).floor() as usize
}

/// `−n^{2λ} d² t²`, the log-tail scale when `k = ⌊n^{1/2 − λ}⌋`.
pub fn moderate_deviation_log_tail(n: usize, lambda: f64, d: f64, t: f64) -> f64 {
    -(n as f64).powf(2.0 * lambda) * d * d * t * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SpectrumMethod;

    fn example_spectrum() -> RestrictedSpectrum {
        RestrictedSpectrum::new(5, 1.09, 0.88, SpectrumMethod::Sampled, 10_000)
    }

    #[test]
    fn measurement_bound_homogeneous_and_ratio() {
        let c = BoundConstants::default();
        let unit = RestrictedSpectrum::unit(5);
        let m = measurement_bound(5, 500, 0.8, 0.3, &unit, &c).unwrap();
        let expected = 5.0 / (0.64 * 0.09) * (5.0 * std::f64::consts::E * 100.0).ln();
        assert!((m - expected).abs() < 1e-10 * expected);
        let wide = RestrictedSpectrum::new(5, 2.0, 1.0, SpectrumMethod::Sampled, 1);
        let m2 = measurement_bound(5, 500, 0.8, 0.3, &wide, &c).unwrap();
        assert!((m2 / m - 2.0).abs() < 1e-12);
        assert!(measurement_bound(5, 500, 0.8, 1.0, &unit, &c).is_err());
    }

    #[test]
    fn example_bound_value() {
        let m = measurement_bound(5, 500, 0.8, 0.2125, &example_spectrum(), &BoundConstants::default()).unwrap();
        // 5·(1.09/0.88)/(0.64·0.2125²)·ln(500e) ≈ 1546.07
        let by_hand = 5.0 * 1.09 / (0.64 * 0.2125 * 0.2125 * 0.88) * (500.0 * std::f64::consts::E).ln();
        assert!((m - by_hand).abs() < 1e-9);
        assert!((m - 1546.0685).abs() < 1e-3, "{m}");
    }

    #[test]
    fn rip_probability_cases() {
        let c4 = BoundConstants::new(1.0, 4.0).unwrap();
        assert!((rip_probability(1.0, 1.0, 1.0, &c4).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let c = BoundConstants::default();
        let f1 = 1.0 - rip_probability(100.0, 0.8, 0.3, &c).unwrap();
        let f2 = 1.0 - rip_probability(200.0, 0.8, 0.3, &c).unwrap();
        assert!((f2 - f1 * f1).abs() < 1e-12);
        assert!(rip_probability(1e9, 0.8, 0.3, &c).unwrap() == 1.0);
    }

    #[test]
    fn mse_bound_cases() {
        let snr = 10f64.powf(2.5);
        let b0 = mse_upper_bound(0.0, snr).unwrap();
        assert!((b0 - mse_threshold(snr)).abs() < 1e-15);
        assert!((mse_threshold(snr) * snr * RIC_LIMIT * RIC_LIMIT - 1.0).abs() < 1e-12);
        assert!((mse_upper_bound(0.1, 2.0 * snr).unwrap() * 2.0 - mse_upper_bound(0.1, snr).unwrap()).abs() < 1e-12);
        assert!(mse_upper_bound(0.307, snr).is_err());
        assert!(mse_upper_bound(0.307 - 1e-9, snr).unwrap() > 1e12);
    }

    #[test]
    fn delay_cases() {
        let snr = 10f64.powf(2.5);
        let q = |epsilon: f64, spectrum: RestrictedSpectrum| DelayQuery {
            epsilon,
            snr_ave: snr,
            spectrum,
            k: 5,
            n: 500,
            p: 0.8,
            constants: BoundConstants::default(),
        };
        let th = mse_threshold(snr);
        assert!(achievable_delay(&q(th, example_spectrum())).unwrap().is_infinite());
        assert!(achievable_delay(&q(0.5 * th, example_spectrum())).unwrap().is_infinite());
        // Just above ε_th the RIC budget is below ξ: infinite as well.
        assert!(achievable_delay(&q(1.01 * th, example_spectrum())).unwrap().is_infinite());
        let unit = RestrictedSpectrum::unit(5);
        let det = achievable_delay_detail(&q(3.0 * th, unit)).unwrap();
        let ds = det.delta_star.unwrap();
        assert_eq!(det.beta_tilde, Some(ds));
        let direct = 5.0 / (0.64 * ds * ds) * (500.0 * std::f64::consts::E).ln();
        assert!((det.delay - direct).abs() < 1e-9 * direct);
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let d = achievable_delay(&q(th * (1.0 + 0.05 * i as f64), example_spectrum())).unwrap();
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn deviation_exponents() {
        for t in [0.01, 0.5, 3.0] {
            assert!((ld_exponent(1, t) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!((ld_exponent(2, 0.1) - 0.087_62).abs() < 1e-5);
        assert!(ld_exponent(3, 0.2) > ld_exponent(3, 0.1));
        assert!(ld_exponent(3, 0.2) < ld_exponent(2, 0.2));
        let base = ld_log_tail_bound(5, 0.04, 1.0, 500);
        assert!((ld_log_tail_bound(5, 0.04, 2.0, 500) / base - 4.0).abs() < 1e-12);
        assert!((ld_log_tail_bound(5, 0.04, 1.0, 1000) / base - 2.0).abs() < 1e-12);
        assert_eq!(moderate_deviation_sparsity(10_000, 0.25), 10);
        assert!((moderate_deviation_log_tail(10_000, 0.25, 2.0, 0.1) + 100.0 * 4.0 * 0.01).abs() < 1e-12);
    }
}
