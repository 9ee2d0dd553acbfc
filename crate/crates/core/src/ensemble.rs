//! Signal model: power patterns, sparsity bases, the normalized sensing
//! matrix `A = Z̃ Σ`, and sparse test instances.
//!
//! Entry `(i, j)` of `Z̃` is `h̃ᵢⱼ sᵢⱼ / √(pm)` with `h̃ ~ CN(0, 1)` the
//! normalized fading coefficient and `s ∈ {±1, 0}` the sensor's selection.
//! Real and imaginary parts are each `Ñ(0, 1/(2pm), p)` and share the zero
//! pattern, since a silent sensor contributes nothing to either.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{param, Error, Result};
use crate::linalg::matvec;
use crate::stochastic::{
    check_probability, sample_complex_gaussian, sample_selection, sample_truncated_gaussian, standard_normal,
    SwEntryParams, TruncatedGaussianParams,
};
use crate::{CMatrix, CVector};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sparsity basis `Ψ`.
#[derive(Debug, Clone)]
pub enum Basis {
    /// Unitary DFT, `Ψᵢⱼ = n^{-1/2} e^{-j2πij/n}` (zero-based indices).
    Dft,
    /// Orthonormal DCT-II; column `j` is the `j`-th cosine atom.
    Dct,
    Identity,
    /// Caller-supplied unitary matrix.
    Custom(Arc<CMatrix>),
}

impl Basis {
    pub fn name(&self) -> &'static str {
        match self {
            Basis::Dft => "dft",
            Basis::Dct => "dct",
            Basis::Identity => "identity",
            Basis::Custom(_) => "custom",
        }
    }

    /// Whether every entry of `Ψ` has modulus `n^{-1/2}`.
    pub fn is_flat(&self) -> bool {
        matches!(self, Basis::Dft)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" => Ok(Basis::Dft),
            "dct" => Ok(Basis::Dct),
            "identity" | "eye" => Ok(Basis::Identity),
            other => Err(Error::UnsupportedBasis(other.to_string())),
        }
    }
}

/// How the receive powers `γⱼ` are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerModel {
    /// Per-sensor `b_j`, `ν_j`, `E_j`; `γⱼ = p bⱼ νⱼ²`.
    Explicit { b: Vec<f64>, nu: Vec<f64>, energy: Vec<f64> },
    /// `γⱼ` i.i.d. truncated Gaussian.
    Stochastic(TruncatedGaussianParams),
    /// `γⱼ` given directly.
    Fixed(Vec<f64>),
}

impl PowerModel {
    /// Every sensor receives the same power.
    pub fn homogeneous(n: usize, gamma: f64) -> Self {
        PowerModel::Fixed(vec![gamma; n])
    }
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    /// Per-measurement noise variance `σ²`; zero means noiseless.
    pub sigma2: f64,
    pub basis: Basis,
    pub power_model: PowerModel,
}

impl NetworkConfig {
    pub fn new(n: usize, k: usize, p: f64, sigma2: f64, basis: Basis, power_model: PowerModel) -> Result<Self> {
        let config = NetworkConfig { n, k, p, sigma2, basis, power_model };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(param("n must be positive"));
        }
        if self.k == 0 || self.k >= self.n / 2 {
            return Err(param(format!("sparsity must satisfy 1 <= k < floor(n/2), got k = {}, n = {}", self.k, self.n)));
        }
        check_probability(self.p)?;
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(param(format!("noise variance must be finite and >= 0, got {}", self.sigma2)));
        }
        if let Basis::Custom(psi) = &self.basis {
            if psi.shape() != (self.n, self.n) {
                return Err(Error::Dimension(format!("custom basis is {:?}, expected {n}x{n}", psi.shape(), n = self.n)));
            }
        }
        match &self.power_model {
            PowerModel::Explicit { b, nu, energy } => {
                if b.len() != self.n || nu.len() != self.n || energy.len() != self.n {
                    return Err(Error::Dimension(format!("explicit power lists must have length n = {}", self.n)));
                }
                for j in 0..self.n {
                    SwEntryParams { b: b[j], p: self.p, energy: energy[j] }.validate(j)?;
                    if !nu[j].is_finite() {
                        return Err(param(format!("sensor {j}: channel scale must be finite")));
                    }
                }
            }
            PowerModel::Fixed(gamma) => {
                if gamma.len() != self.n {
                    return Err(Error::Dimension(format!("power vector has length {}, expected {}", gamma.len(), self.n)));
                }
            }
            PowerModel::Stochastic(_) => {}
        }
        Ok(())
    }
}

/// Receive powers of one realization together with the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPattern {
    pub gamma: Vec<f64>,
    pub p_ave: f64,
    pub sigma2: f64,
    /// `P_ave / σ²` (linear); infinite when noiseless.
    pub snr_ave: f64,
}

impl PowerPattern {
    pub fn new(gamma: Vec<f64>, sigma2: f64) -> Result<Self> {
        if gamma.is_empty() {
            return Err(param("power pattern must be non-empty"));
        }
        if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(param("receive powers must be finite and >= 0"));
        }
        // Exact for constant patterns, so homogeneous weights are exactly one.
        let p_ave = if gamma.iter().all(|g| *g == gamma[0]) {
            gamma[0]
        } else {
            gamma.iter().sum::<f64>() / gamma.len() as f64
        };
        let mut pattern = PowerPattern { gamma, p_ave, sigma2: 0.0, snr_ave: f64::INFINITY };
        pattern.set_sigma2(sigma2);
        Ok(pattern)
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn set_sigma2(&mut self, sigma2: f64) {
        self.sigma2 = sigma2;
        self.snr_ave = self.p_ave / sigma2;
    }

    /// Sets `σ² = P_ave / 10^{dB/10}`.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let snr = 10f64.powf(snr_db / 10.0);
        self.sigma2 = self.p_ave / snr;
        self.snr_ave = snr;
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr_ave.log10()
    }

    /// Normalized noise variance `σ̃² = σ² / (m P_ave)`.
    pub fn normalized_noise_variance(&self, m: usize) -> f64 {
        if self.sigma2 == 0.0 {
            0.0
        } else {
            1.0 / (m as f64 * self.snr_ave)
        }
    }

    /// All `γⱼ` equal.
    pub fn is_homogeneous(&self) -> bool {
        self.gamma.iter().all(|g| *g == self.gamma[0])
    }
}

pub fn build_power_pattern<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<PowerPattern> {
    config.validate()?;
    let gamma = match &config.power_model {
        PowerModel::Explicit { b, nu, .. } => b.iter().zip(nu).map(|(b, nu)| config.p * b * nu * nu).collect(),
        PowerModel::Stochastic(tg) => (0..config.n).map(|_| sample_truncated_gaussian(tg, rng)).collect(),
        PowerModel::Fixed(gamma) => gamma.clone(),
    };
    let pattern = PowerPattern::new(gamma, config.sigma2)?;
    if pattern.p_ave <= 0.0 {
        return Err(param("average receive power is zero"));
    }
    Ok(pattern)
}

pub fn unitary_basis(n: usize, basis: &Basis) -> Result<CMatrix> {
    if n == 0 {
        return Err(param("basis size must be positive"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    match basis {
        Basis::Dft => Ok(CMatrix::from_fn(n, n, |i, j| {
            // Reduce the exponent modulo n before scaling to keep phases exact.
            let e = ((i as u128 * j as u128) % n as u128) as f64;
            Complex64::from_polar(scale, -2.0 * PI * e / n as f64)
        })),
        Basis::Dct => Ok(CMatrix::from_fn(n, n, |i, j| {
            let c = if j == 0 { scale } else { (2.0 / n as f64).sqrt() };
            Complex64::new(c * (PI * (2 * i + 1) as f64 * j as f64 / (2 * n) as f64).cos(), 0.0)
        })),
        Basis::Identity => Ok(CMatrix::identity(n, n)),
        Basis::Custom(psi) => {
            if psi.shape() != (n, n) {
                return Err(Error::Dimension(format!("custom basis is {:?}, expected {n}x{n}", psi.shape())));
            }
            let err = (psi.adjoint() * psi.as_ref() - CMatrix::identity(n, n)).norm();
            if err > 1e-10 * n as f64 {
                return Err(Error::UnsupportedBasis(format!("custom basis is not unitary (‖ΨᴴΨ − I‖_F = {err:.3e})")));
            }
            Ok(psi.as_ref().clone())
        }
    }
}

/// `Σ = Γ Ψ / √P_ave` with `Γ = diag(√γⱼ)`.
pub fn build_sigma(pattern: &PowerPattern, psi: &CMatrix) -> Result<CMatrix> {
    let n = pattern.n();
    if psi.shape() != (n, n) {
        return Err(Error::Dimension(format!("basis is {:?}, pattern has n = {n}", psi.shape())));
    }
    if !(pattern.p_ave > 0.0) {
        return Err(param("average receive power is zero"));
    }
    let w: Vec<f64> = pattern.gamma.iter().map(|g| (g / pattern.p_ave).sqrt()).collect();
    Ok(CMatrix::from_fn(n, n, |i, j| psi[(i, j)] * w[i]))
}

/// One realization of the normalized signal model.
#[derive(Debug, Clone)]
pub struct SensingEnsemble {
    pub sigma_mat: CMatrix,
    pub z_tilde: CMatrix,
    pub a_mat: CMatrix,
    pub m: usize,
    pub p: f64,
    pub pattern: PowerPattern,
    /// Tag of the basis used for `Σ`.
    pub basis: &'static str,
}

impl SensingEnsemble {
    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    /// Noise variance `σ̃²` of the normalized model.
    pub fn noise_variance(&self) -> f64 {
        self.pattern.normalized_noise_variance(self.m)
    }

    /// Rebuilds the un-normalized sensing matrix `Z = √m Z̃ Γ`.
    pub fn physical_z(&self) -> CMatrix {
        let sm = (self.m as f64).sqrt();
        let g: Vec<f64> = self.pattern.gamma.iter().map(|g| g.sqrt()).collect();
        CMatrix::from_fn(self.m, self.n(), |i, j| self.z_tilde[(i, j)] * (sm * g[j]))
    }
}

/// Draws `Z̃` row by row; each entry consumes one uniform (selection) and two
/// normals (fading), so the first `m'` rows of a larger draw coincide with a
/// draw of `m'` rows up to the `1/√(pm)` scale.
pub fn sample_z_tilde<R: Rng + ?Sized>(m: usize, n: usize, p: f64, rng: &mut R) -> Result<CMatrix> {
    check_probability(p)?;
    if m == 0 {
        return Err(param("measurement count must be positive"));
    }
    let scale = 1.0 / (p * m as f64).sqrt();
    let mut z = CMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let (s, h) = entry_draw(p, rng);
            z[(i, j)] = h * (f64::from(s) * scale);
        }
    }
    Ok(z)
}

fn entry_draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> (i8, Complex64) {
    let s = sample_selection(p, rng);
    let re = standard_normal(rng);
    let im = standard_normal(rng);
    (s, Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2)
}

/// `A = Z̃ Σ`. For the DFT basis each row is an FFT of the power-weighted
/// row of `Z̃`; other bases use a dense product.
pub fn equivalent_matrix(z_tilde: &CMatrix, sigma_mat: &CMatrix, pattern: &PowerPattern, basis: &Basis) -> CMatrix {
    let (m, n) = z_tilde.shape();
    if !matches!(basis, Basis::Dft) {
        return z_tilde * sigma_mat;
    }
    let w: Vec<f64> = pattern.gamma.iter().map(|g| (g / pattern.p_ave).sqrt()).collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut a = CMatrix::zeros(m, n);
    let mut buf = vec![ZERO; n];
    for i in 0..m {
        for j in 0..n {
            buf[j] = z_tilde[(i, j)] * w[j];
        }
        fft.process(&mut buf);
        for j in 0..n {
            a[(i, j)] = buf[j] * scale;
        }
    }
    a
}

/// Builds an ensemble for a given pattern, drawing `Z̃` from `rng`.
pub fn ensemble_from_pattern<R: Rng + ?Sized>(
    config: &NetworkConfig,
    pattern: PowerPattern,
    m: usize,
    rng: &mut R,
) -> Result<SensingEnsemble> {
    let n = config.n;
    if pattern.n() != n {
        return Err(Error::Dimension(format!("pattern has n = {}, config has n = {n}", pattern.n())));
    }
    let psi = unitary_basis(n, &config.basis)?;
    let sigma_mat = build_sigma(&pattern, &psi)?;
    let z_tilde = sample_z_tilde(m, n, config.p, rng)?;
    let a_mat = equivalent_matrix(&z_tilde, &sigma_mat, &pattern, &config.basis);
    Ok(SensingEnsemble { sigma_mat, z_tilde, a_mat, m, p: config.p, pattern, basis: config.basis.name() })
}

/// Draws the power pattern and then `Z̃` from the same stream.
pub fn build_sensing_ensemble<R: Rng + ?Sized>(config: &NetworkConfig, m: usize, rng: &mut R) -> Result<SensingEnsemble> {
    let pattern = build_power_pattern(config, rng)?;
    ensemble_from_pattern(config, pattern, m, rng)
}

/// Channel matrix, SW matrix and their product for one frame.
#[derive(Debug, Clone)]
pub struct PhysicalChannel {
    pub h: CMatrix,
    pub phi: CMatrix,
    pub z: CMatrix,
}

/// Builds `H`, `Φ` and `Z = H ⊙ Φ` with `Hᵢⱼ ~ CN(0, νⱼ²)` and
/// `Φᵢⱼ ∈ {±√bⱼ, 0}`, consuming `rng` exactly like [`sample_z_tilde`].
///
/// Without explicit `(b, ν)` the factorization `νⱼ = 1`, `bⱼ = γⱼ/p` is used.
pub fn build_physical_channel<R: Rng + ?Sized>(
    config: &NetworkConfig,
    pattern: &PowerPattern,
    m: usize,
    rng: &mut R,
) -> Result<PhysicalChannel> {
    let n = config.n;
    let (b, nu): (Vec<f64>, Vec<f64>) = match &config.power_model {
        PowerModel::Explicit { b, nu, .. } => (b.clone(), nu.iter().map(|v| v.abs()).collect()),
        _ => (pattern.gamma.iter().map(|g| g / config.p).collect(), vec![1.0; n]),
    };
    let mut h = CMatrix::zeros(m, n);
    let mut phi = CMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let (s, hn) = entry_draw(config.p, rng);
            h[(i, j)] = hn * nu[j];
            phi[(i, j)] = Complex64::new(f64::from(s) * b[j].sqrt(), 0.0);
        }
    }
    let z = h.component_mul(&phi);
    Ok(PhysicalChannel { h, phi, z })
}

/// Normalizes a physical channel into an ensemble: `Z̃ = Z Γ⁻¹ / √m`.
/// Columns of silent sensors (`γⱼ = 0`) are left at zero; the matching row
/// of `Σ` vanishes, so they do not enter `A`.
pub fn ensemble_from_physical(
    config: &NetworkConfig,
    pattern: PowerPattern,
    channel: &PhysicalChannel,
) -> Result<SensingEnsemble> {
    let (m, n) = channel.z.shape();
    let sm = (m as f64).sqrt();
    let mut z_tilde = CMatrix::zeros(m, n);
    for j in 0..n {
        let g = pattern.gamma[j];
        if g > 0.0 {
            for i in 0..m {
                z_tilde[(i, j)] = channel.z[(i, j)] / (sm * g.sqrt());
            }
        }
    }
    let psi = unitary_basis(n, &config.basis)?;
    let sigma_mat = build_sigma(&pattern, &psi)?;
    let a_mat = equivalent_matrix(&z_tilde, &sigma_mat, &pattern, &config.basis);
    Ok(SensingEnsemble { sigma_mat, z_tilde, a_mat, m, p: config.p, pattern, basis: config.basis.name() })
}

/// How the nonzero amplitudes of `x` are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMode {
    /// Complex Gaussian nonzeros rescaled to `‖x‖₂ = 1`.
    UnitNorm,
    /// `|x_q| = 1` with uniform phases.
    UnitModulus,
}

impl FromStr for AmplitudeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-norm" | "unit_norm" => Ok(AmplitudeMode::UnitNorm),
            "unit-modulus" | "unit_modulus" => Ok(AmplitudeMode::UnitModulus),
            other => Err(param(format!("unknown amplitude mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseInstance {
    pub x: CVector,
    /// Sorted support.
    pub support: Vec<usize>,
    pub y: CVector,
    pub noise: CVector,
}

/// Uniform support of size `k` and amplitudes per `mode`.
pub fn sample_sparse_signal<R: Rng + ?Sized>(n: usize, k: usize, mode: AmplitudeMode, rng: &mut R) -> Result<(CVector, Vec<usize>)> {
    if k > n {
        return Err(param(format!("support size {k} exceeds n = {n}")));
    }
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let mut x = CVector::zeros(n);
    match mode {
        AmplitudeMode::UnitNorm => {
            for &s in &support {
                x[s] = sample_complex_gaussian(1.0, rng)?;
            }
            let norm = x.norm();
            if norm > 0.0 {
                x /= Complex64::new(norm, 0.0);
            }
        }
        AmplitudeMode::UnitModulus => {
            for &s in &support {
                // (0, 2π]
                let theta = 2.0 * PI * (1.0 - rng.random::<f64>());
                x[s] = Complex64::from_polar(1.0, theta);
            }
        }
    }
    Ok((x, support))
}

/// Unit-variance circular complex Gaussian noise scaled by `std`.
pub fn sample_noise<R: Rng + ?Sized>(m: usize, std: f64, rng: &mut R) -> CVector {
    CVector::from_fn(m, |_, _| sample_complex_gaussian(1.0, rng).map(|z| z * std).unwrap_or(ZERO))
}

impl SparseInstance {
    /// Forms `y = A x + e`.
    pub fn assemble(ensemble: &SensingEnsemble, x: CVector, support: Vec<usize>, noise: CVector) -> Result<Self> {
        if x.len() != ensemble.n() || noise.len() != ensemble.m {
            return Err(Error::Dimension("signal or noise length does not match the ensemble".into()));
        }
        let mut y = CVector::zeros(ensemble.m);
        matvec(&ensemble.a_mat, x.as_slice(), y.as_mut_slice());
        y += &noise;
        Ok(SparseInstance { x, support, y, noise })
    }
}

pub fn sample_sparse_instance<R: Rng + ?Sized>(
    ensemble: &SensingEnsemble,
    config: &NetworkConfig,
    rng: &mut R,
    amplitude_mode: AmplitudeMode,
) -> Result<SparseInstance> {
    let n = ensemble.n();
    if config.k >= n / 2 {
        return Err(param(format!("sparsity must satisfy k < floor(n/2), got k = {}, n = {n}", config.k)));
    }
    let (x, support) = sample_sparse_signal(n, config.k, amplitude_mode, rng)?;
    let noise = sample_noise(ensemble.m, ensemble.noise_variance().sqrt(), rng);
    SparseInstance::assemble(ensemble, x, support, noise)
}
