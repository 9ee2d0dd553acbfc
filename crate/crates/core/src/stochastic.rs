//! Samplers for every distribution in the signal model, plus the closed-form
//! cumulant-generating function of the truncated Gaussian.
//!
//! All samplers take an explicit `&mut impl Rng`; nothing here owns state.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::special::{ln_normal_cdf, normal_cdf, normal_pdf};

/// Mixed Gaussian `Ñ(μ, ν², p)`: a point mass at zero with weight `1 − p`
/// and a Gaussian `N(μ, ν²)` with weight `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedGaussianParams {
    pub mu: f64,
    pub nu2: f64,
    pub p: f64,
}

impl MixedGaussianParams {
    pub fn new(mu: f64, nu2: f64, p: f64) -> Result<Self> {
        let params = MixedGaussianParams { mu, nu2, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.p)?;
        if !(self.nu2 >= 0.0) || !self.mu.is_finite() {
            return Err(param(format!("mixed Gaussian needs nu2 >= 0 and finite mu, got nu2 = {}, mu = {}", self.nu2, self.mu)));
        }
        Ok(())
    }
}

/// Truncated Gaussian `N_tr(μ, ω²)`: `N(μ, ω²)` conditioned on `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGaussianParams {
    mu: f64,
    omega: f64,
}

impl TruncatedGaussianParams {
    pub fn new(mu: f64, omega: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(omega > 0.0 && omega.is_finite()) {
            return Err(param(format!("truncated Gaussian needs mu > 0 and omega > 0, got mu = {mu}, omega = {omega}")));
        }
        Ok(TruncatedGaussianParams { mu, omega })
    }

    /// Parameterize by the location and the homogeneity ratio `d = μ/ω`.
    pub fn from_homogeneity(mu: f64, d: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(param(format!("homogeneity ratio d must be positive, got {d}")));
        }
        Self::new(mu, mu / d)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Homogeneity ratio `d = μ/ω`.
    pub fn d(&self) -> f64 {
        self.mu / self.omega
    }

    /// Density `g(x; μ, ω)`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        normal_pdf((x - self.mu) / self.omega) / (self.omega * normal_cdf(self.d()))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let lo = normal_cdf(-self.d());
        (normal_cdf((x - self.mu) / self.omega) - lo) / (1.0 - lo)
    }

    /// Mean `μ + ω φ(d) / Φ(d)`.
    pub fn mean(&self) -> f64 {
        let d = self.d();
        self.mu + self.omega * normal_pdf(d) / normal_cdf(d)
    }

    pub fn variance(&self) -> f64 {
        let d = self.d();
        let lambda = normal_pdf(d) / normal_cdf(d);
        self.omega * self.omega * (1.0 - d * lambda - lambda * lambda)
    }
}

/// One sensor's selection-and-weight entry: `±√b` with probability `p/2`
/// each, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwEntryParams {
    pub b: f64,
    pub p: f64,
    pub energy: f64,
}

impl SwEntryParams {
    pub fn new(b: f64, p: f64, energy: f64) -> Result<Self> {
        let params = SwEntryParams { b, p, energy };
        params.validate(0)?;
        Ok(params)
    }

    /// Checks `b ≥ 0`, `p ∈ (0,1]` and the causal constraint `p·b ≤ E`
    /// (non-strict); `sensor` only labels the error.
    pub fn validate(&self, sensor: usize) -> Result<()> {
        check_probability(self.p)?;
        if !(self.b >= 0.0) || !(self.energy >= 0.0) {
            return Err(param(format!("sensor {sensor}: b and E must be non-negative")));
        }
        let spent = self.p * self.b;
        if spent > self.energy {
            return Err(Error::EnergyConstraint { sensor, spent, available: self.energy });
        }
        Ok(())
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(param(format!("transmit probability must lie in (0, 1], got {p}")))
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn sample_mixed_gaussian<R: Rng + ?Sized>(params: &MixedGaussianParams, rng: &mut R) -> Result<f64> {
    params.validate()?;
    Ok(mixed_gaussian_unchecked(params, rng))
}

fn mixed_gaussian_unchecked<R: Rng + ?Sized>(params: &MixedGaussianParams, rng: &mut R) -> f64 {
    // The Gaussian draw is consumed either way so stream offsets do not
    // depend on the outcome of the selection.
    let u: f64 = rng.random();
    let g = standard_normal(rng);
    if u < params.p {
        params.mu + params.nu2.sqrt() * g
    } else {
        0.0
    }
}

/// Fills `out` with i.i.d. mixed Gaussian draws.
pub fn fill_mixed_gaussian<R: Rng + ?Sized>(params: &MixedGaussianParams, rng: &mut R, out: &mut [f64]) -> Result<()> {
    params.validate()?;
    for v in out {
        *v = mixed_gaussian_unchecked(params, rng);
    }
    Ok(())
}

/// Rejection sampler: redraw `N(μ, ω²)` until non-negative. Acceptance rate
/// is `Φ(d)`, above 0.84 for `d ≥ 1`.
pub fn sample_truncated_gaussian<R: Rng + ?Sized>(params: &TruncatedGaussianParams, rng: &mut R) -> f64 {
    loop {
        let x = params.mu + params.omega * standard_normal(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

/// Selection variable of the SW matrix: `+1`, `−1` with probability `p/2`
/// each, `0` with probability `1 − p`.
pub fn sample_selection<R: Rng + ?Sized>(p: f64, rng: &mut R) -> i8 {
    let u: f64 = rng.random();
    if u < 0.5 * p {
        1
    } else if u < p {
        -1
    } else {
        0
    }
}

pub fn sample_sw_entry<R: Rng + ?Sized>(params: &SwEntryParams, rng: &mut R) -> Result<f64> {
    params.validate(0)?;
    Ok(f64::from(sample_selection(params.p, rng)) * params.b.sqrt())
}

/// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Result<Complex64> {
    if !(variance >= 0.0) {
        return Err(param(format!("complex Gaussian variance must be >= 0, got {variance}")));
    }
    let s = (0.5 * variance).sqrt();
    let re = standard_normal(rng);
    let im = standard_normal(rng);
    Ok(Complex64::new(s * re, s * im))
}

/// `φ(μ, ω, s) = ln(1 − Q(μ/ω + ωs)) − ln(1 − Q(μ/ω))`, the correction term
/// of the truncated-Gaussian CGF relative to its parent Gaussian.
pub fn cgf_correction(params: &TruncatedGaussianParams, s: f64) -> f64 {
    let d = params.d();
    ln_normal_cdf(d + params.omega * s) - ln_normal_cdf(d)
}

/// `ln E[exp(sX)]` for `X ~ N_tr(μ, ω²)`.
pub fn truncated_gaussian_cgf(params: &TruncatedGaussianParams, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    params.mu * s + 0.5 * params.omega * params.omega * s * s + cgf_correction(params, s)
}
