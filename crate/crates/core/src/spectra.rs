//! k-restricted extreme eigenvalues of `ΣᴴΣ`, the DFT norm expansion, the
//! piecewise-linear RIC maps and empirical RIC estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::{hermitian_eigenvalues, norm2_sqr};
use crate::stochastic::sample_complex_gaussian;
use crate::CMatrix;

/// Default cap on the number of supports visited by exact enumeration.
pub const ENUMERATION_BUDGET: u64 = 2_000_000;
/// Largest support handled by the dense Gram eigensolver.
pub const MAX_SUPPORT: usize = 64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `ΣᴴΣ` in a form that can hand out principal submatrices cheaply.
#[derive(Debug, Clone)]
pub enum Gram {
    Dense(CMatrix),
    /// `G(q, l) = c[(l − q) mod n]`, the structure produced by a diagonal
    /// power pattern over the DFT basis.
    Circulant(Vec<Complex64>),
}

impl Gram {
    pub fn from_sigma(sigma_mat: &CMatrix) -> Self {
        Gram::Dense(sigma_mat.ad_mul(sigma_mat))
    }

    /// Circulant Gram of `Σ = diag(√γ) Ψ_DFT / √P_ave`: `c = FFT(γ) / Σγ`.
    pub fn dft_circulant(gamma: &[f64]) -> Result<Self> {
        if gamma.is_empty() {
            return Err(param("power pattern must be non-empty"));
        }
        let fft = FftPlanner::new().plan_fft_forward(gamma.len());
        Self::dft_circulant_with(gamma, fft.as_ref())
    }

    /// [`Gram::dft_circulant`] with a caller-owned FFT plan of length `n`.
    pub fn dft_circulant_with(gamma: &[f64], fft: &dyn Fft<f64>) -> Result<Self> {
        let total: f64 = gamma.iter().sum();
        if gamma.is_empty() || !(total > 0.0) || fft.len() != gamma.len() {
            return Err(param("power pattern must be non-empty with positive total power"));
        }
        let mut c: Vec<Complex64> = gamma.iter().map(|g| Complex64::new(*g, 0.0)).collect();
        fft.process(&mut c);
        for v in &mut c {
            *v /= total;
        }
        Ok(Gram::Circulant(c))
    }

    pub fn n(&self) -> usize {
        match self {
            Gram::Dense(g) => g.nrows(),
            Gram::Circulant(c) => c.len(),
        }
    }

    #[inline]
    pub fn entry(&self, q: usize, l: usize) -> Complex64 {
        match self {
            Gram::Dense(g) => g[(q, l)],
            Gram::Circulant(c) => {
                let n = c.len();
                c[(l + n - q) % n]
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.entry(i, i).re).collect()
    }

    /// Writes `G_TT` row-major into `buf`.
    pub fn principal(&self, support: &[usize], buf: &mut Vec<Complex64>) {
        let k = support.len();
        buf.clear();
        buf.resize(k * k, ZERO);
        for (a, &q) in support.iter().enumerate() {
            for (b, &l) in support.iter().enumerate().skip(a) {
                buf[a * k + b] = self.entry(q, l);
            }
        }
    }

    /// Ascending eigenvalues of `G_TT`.
    pub fn support_eigenvalues(&self, support: &[usize], buf: &mut Vec<Complex64>) -> Vec<f64> {
        self.principal(support, buf);
        hermitian_eigenvalues(buf, support.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    ExactEnumeration,
    /// Extremes over sampled supports: `rho_max` is a lower bound and
    /// `rho_min` an upper bound on the true values.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSpectrum {
    pub k: usize,
    pub rho_max: f64,
    pub rho_min: f64,
    pub method: SpectrumMethod,
    pub supports_examined: u64,
    /// `r(k) = ρ_max / ρ_min`.
    pub ratio: f64,
}

impl RestrictedSpectrum {
    pub fn new(k: usize, rho_max: f64, rho_min: f64, method: SpectrumMethod, supports_examined: u64) -> Self {
        RestrictedSpectrum { k, rho_max, rho_min, method, supports_examined, ratio: rho_max / rho_min }
    }

    /// Spectrum of a perfectly homogeneous pattern.
    pub fn unit(k: usize) -> Self {
        Self::new(k, 1.0, 1.0, SpectrumMethod::ExactEnumeration, 0)
    }
}

/// `C(n, k)` as a float (saturates to infinity).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

fn check_support_size(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(param(format!("support size must satisfy 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if k > MAX_SUPPORT {
        return Err(param(format!("support size {k} exceeds the supported maximum {MAX_SUPPORT}")));
    }
    Ok(())
}

/// Exact `(ρ_max(k), ρ_min(k))` over all supports of size exactly `k`.
///
/// By Cauchy interlacing, `λ_max` of a principal submatrix never exceeds
/// that of any submatrix containing it, and `λ_min` never falls below it, so
/// the extremes over `|T| ≤ k` are attained at `|T| = k`.
pub fn restricted_eigs_exact(sigma_mat: &CMatrix, k: usize) -> Result<RestrictedSpectrum> {
    restricted_eigs_exact_gram(&Gram::from_sigma(sigma_mat), k, ENUMERATION_BUDGET)
}

pub fn restricted_eigs_exact_gram(gram: &Gram, k: usize, budget: u64) -> Result<RestrictedSpectrum> {
    let n = gram.n();
    check_support_size(n, k)?;
    let total = binomial(n, k);
    if total > budget as f64 {
        return Err(Error::BudgetExceeded { required: total, budget: budget as f64 });
    }
    let (hi, lo) = (0..=n - k)
        .into_par_iter()
        .map(|first| {
            let mut support: Vec<usize> = (first..first + k).collect();
            let mut buf = Vec::with_capacity(k * k);
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            loop {
                let vals = gram.support_eigenvalues(&support, &mut buf);
                hi = hi.max(vals[k - 1]);
                lo = lo.min(vals[0]);
                if !next_combination_tail(&mut support, n) {
                    break;
                }
            }
            (hi, lo)
        })
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    Ok(RestrictedSpectrum::new(k, hi, lo, SpectrumMethod::ExactEnumeration, total as u64))
}

/// Advances a sorted combination in place, keeping `support[0]` fixed.
fn next_combination_tail(support: &mut [usize], n: usize) -> bool {
    let k = support.len();
    let mut i = k;
    while i > 1 {
        i -= 1;
        if support[i] < n - (k - i) {
            support[i] += 1;
            for j in i + 1..k {
                support[j] = support[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Advances a sorted combination of `0..n` in lexicographic order.
pub fn next_combination(support: &mut [usize], n: usize) -> bool {
    let k = support.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if support[i] < n - (k - i) {
            support[i] += 1;
            for j in i + 1..k {
                support[j] = support[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Extremes over `num_supports` uniformly drawn supports plus all
/// singletons. Supports are drawn sequentially, so a run with fewer supports
/// on the same stream examines a prefix of the larger run. When
/// `num_supports ≥ C(n, k)` all supports are enumerated instead.
pub fn restricted_eigs_sampled<R: Rng + ?Sized>(
    sigma_mat: &CMatrix,
    k: usize,
    num_supports: u64,
    rng: &mut R,
) -> Result<RestrictedSpectrum> {
    restricted_eigs_sampled_gram(&Gram::from_sigma(sigma_mat), k, num_supports, rng)
}

pub fn restricted_eigs_sampled_gram<R: Rng + ?Sized>(
    gram: &Gram,
    k: usize,
    num_supports: u64,
    rng: &mut R,
) -> Result<RestrictedSpectrum> {
    let n = gram.n();
    check_support_size(n, k)?;
    if num_supports == 0 {
        return Err(param("at least one support must be sampled"));
    }
    if num_supports as f64 >= binomial(n, k) {
        return restricted_eigs_exact_gram(gram, k, num_supports);
    }
    let diag = gram.diagonal();
    let mut hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let mut buf = Vec::with_capacity(k * k);
    for _ in 0..num_supports {
        let support = rand::seq::index::sample(rng, n, k).into_vec();
        let vals = gram.support_eigenvalues(&support, &mut buf);
        hi = hi.max(vals[k - 1]);
        lo = lo.min(vals[0]);
    }
    Ok(RestrictedSpectrum::new(k, hi, lo, SpectrumMethod::Sampled, num_supports))
}

/// Exact `(ρ_max(2), ρ_min(2))` of a circulant Gram with unit diagonal:
/// `1 ± max_{Δ≠0} |c[Δ]|`.
pub fn circulant_pair_extremes(c: &[Complex64]) -> (f64, f64) {
    let peak = c.iter().skip(1).map(|z| z.norm()).fold(0.0, f64::max);
    (c[0].re + peak, c[0].re - peak)
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n).map(|e| Complex64::from_polar(1.0, -2.0 * PI * e as f64 / n as f64)).collect()
}

/// `‖Σv‖₂²` for the DFT basis from the power pattern alone:
///
/// `‖w‖² = (1/Σγ) Σᵢ γᵢ (Σ_q |v_q|² + Σ_{l<q} 2 Re{v_q v_l* e^{-j2πi(s_q−s_l)/n}})`.
///
/// `support` holds the indices `s_q` of the nonzeros `values`. Cost is
/// `O(n k²)`; the full `Σ` is never formed.
pub fn dft_norm_sq(gamma: &[f64], support: &[usize], values: &[Complex64]) -> Result<f64> {
    let n = gamma.len();
    if support.len() != values.len() {
        return Err(Error::Dimension("support and values differ in length".into()));
    }
    if support.iter().any(|&s| s >= n) {
        return Err(Error::Dimension(format!("support index out of range for n = {n}")));
    }
    let total: f64 = gamma.iter().sum();
    if !(total > 0.0) {
        return Err(param("power pattern must have positive total power"));
    }
    let energy = norm2_sqr(values);
    // Cross terms cancel exactly over a full period of a constant pattern.
    if gamma.iter().all(|g| *g == gamma[0]) {
        return Ok(energy);
    }
    let tw = twiddles(n);
    let k = support.len();
    let mut acc = 0.0;
    for (i, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let mut cross = 0.0;
        for q in 1..k {
            for l in 0..q {
                let ds = (support[q] + n - support[l]) % n;
                let e = (i * ds) % n;
                cross += (values[q] * values[l].conj() * tw[e]).re;
            }
        }
        acc += g * (energy + 2.0 * cross);
    }
    Ok(acc / total)
}

/// Two-sparse closed form `1 + 2 A₁ A₂ S_n` with
/// `S_n = Σ γᵢ aᵢ / Σ γᵢ` and `aᵢ = cos(θ₁ − θ₂ + 2π i Δ / n)`,
/// `Δ = s₂ − s₁`; assumes `A₁² + A₂² = 1`.
pub fn dft_norm_sq_pair(gamma: &[f64], delta: usize, amp: (f64, f64), theta: (f64, f64)) -> f64 {
    let n = gamma.len();
    let total: f64 = gamma.iter().sum();
    let mut num = 0.0;
    for (i, &g) in gamma.iter().enumerate() {
        let e = ((i * delta) % n) as f64;
        num += g * (theta.0 - theta.1 + 2.0 * PI * e / n as f64).cos();
    }
    1.0 + 2.0 * amp.0 * amp.1 * num / total
}

/// `(1/n) Σ_{i<n} cos(θ + 2π i Δ / n)`; zero for `Δ mod n ≠ 0`.
pub fn cesaro_mean(theta: f64, delta: usize, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let e = ((i * delta) % n) as f64;
        s += (theta + 2.0 * PI * e / n as f64).cos();
    }
    s / n as f64
}

/// `ξ, ζ, ϑ, ς` and the modified RIC `β` for a given `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipParams {
    pub xi_k: f64,
    pub zeta_k: f64,
    pub vartheta_k: f64,
    pub varsigma_k: f64,
    pub delta_k: f64,
    pub beta_k: f64,
    /// `ρ_max > 2`, outside the derivation range of the maps. Since this
    /// forces `ξ > 1`, [`rip_maps`] rejects every `δ` first and the flag is
    /// only set on values built by hand.
    pub rho_max_above_two: bool,
}

/// `ξ = max(1 − ρ_min, ρ_max − 1)`.
pub fn xi(rho_max: f64, rho_min: f64) -> f64 {
    (1.0 - rho_min).max(rho_max - 1.0)
}

/// `ζ = max(0, (2 − ρ_max − ρ_min) / (ρ_max − ρ_min))`, zero when
/// `ρ_max = ρ_min`.
pub fn zeta(rho_max: f64, rho_min: f64) -> f64 {
    let gap = rho_max - rho_min;
    if gap <= 0.0 {
        return 0.0;
    }
    ((2.0 - rho_max - rho_min) / gap).max(0.0)
}

pub fn vartheta(rho_max: f64, rho_min: f64) -> f64 {
    (1.0 + zeta(rho_max, rho_min)) * rho_max - 1.0
}

pub fn varsigma(rho_max: f64) -> f64 {
    2.0 / rho_max - 1.0
}

/// Piecewise-linear `β(δ)`; `None` outside `(ξ, 1)`.
///
/// Written as `(δ − (1 − ρ_min))/ρ_min` and `(δ − (ρ_max − 1))/ρ_max` so that
/// `β = δ` holds bit-exactly when `ρ = 1`.
pub fn beta_from_delta(rho_max: f64, rho_min: f64, delta: f64) -> Option<f64> {
    let xi = xi(rho_max, rho_min);
    if !(delta > xi && delta < 1.0) {
        return None;
    }
    if delta < vartheta(rho_max, rho_min) {
        Some((delta - (1.0 - rho_min)) / rho_min)
    } else {
        Some((delta - (rho_max - 1.0)) / rho_max)
    }
}

/// Inverse map `δ(β)` on `(0, ς)`.
pub fn delta_from_beta(rho_max: f64, rho_min: f64, beta: f64) -> Option<f64> {
    if !(beta > 0.0 && beta < varsigma(rho_max)) {
        return None;
    }
    if beta < zeta(rho_max, rho_min) {
        Some(1.0 - (1.0 - beta) * rho_min)
    } else {
        Some((1.0 + beta) * rho_max - 1.0)
    }
}

pub fn rip_maps(spectrum: &RestrictedSpectrum, delta_k: f64) -> Result<RipParams> {
    let (hi, lo) = (spectrum.rho_max, spectrum.rho_min);
    if !(lo > 0.0) || lo > hi {
        return Err(param(format!("restricted eigenvalues must satisfy 0 < rho_min <= rho_max, got ({hi}, {lo})")));
    }
    let xi_k = xi(hi, lo);
    let beta_k = beta_from_delta(hi, lo, delta_k).ok_or_else(|| {
        Error::InfeasibleRic(format!("delta = {delta_k} must lie in (xi, 1) = ({xi_k}, 1)"))
    })?;
    Ok(RipParams {
        xi_k,
        zeta_k: zeta(hi, lo),
        vartheta_k: vartheta(hi, lo),
        varsigma_k: varsigma(hi),
        delta_k,
        beta_k,
        rho_max_above_two: hi > 2.0,
    })
}

/// Lower bound on the RIC of `A`: the worst `|‖Av‖² − 1|` over random
/// unit-norm `k`-sparse `v`, together with the extreme Gram eigenvalues of
/// each sampled `A_T`.
pub fn empirical_ric<R: Rng + ?Sized>(a_mat: &CMatrix, k: usize, num_trials: usize, rng: &mut R) -> Result<f64> {
    let (m, n) = a_mat.shape();
    check_support_size(n, k)?;
    if num_trials == 0 {
        return Err(param("at least one trial is required"));
    }
    let data = a_mat.as_slice();
    let mut worst: f64 = 0.0;
    let mut buf = vec![ZERO; k * k];
    let mut av = vec![ZERO; m];
    for _ in 0..num_trials {
        let support = rand::seq::index::sample(rng, n, k).into_vec();
        let mut v: Vec<Complex64> = (0..k).map(|_| sample_complex_gaussian(1.0, rng)).collect::<Result<_>>()?;
        let nv = norm2_sqr(&v).sqrt();
        v.iter_mut().for_each(|z| *z /= nv);
        av.fill(ZERO);
        for (q, &s) in support.iter().enumerate() {
            for (o, a) in av.iter_mut().zip(&data[s * m..(s + 1) * m]) {
                *o += a * v[q];
            }
        }
        worst = worst.max((norm2_sqr(&av) - 1.0).abs());
        for (a, &sa) in support.iter().enumerate() {
            let ca = &data[sa * m..(sa + 1) * m];
            for (b, &sb) in support.iter().enumerate().skip(a) {
                let cb = &data[sb * m..(sb + 1) * m];
                buf[a * k + b] = ca.iter().zip(cb).map(|(x, y)| x.conj() * y).sum();
            }
        }
        let vals = hermitian_eigenvalues(&mut buf, k);
        worst = worst.max((vals[k - 1] - 1.0).abs()).max((1.0 - vals[0]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_sigma, unitary_basis, Basis, PowerPattern};
    use crate::rng::stream_from_seed;

    fn pattern(n: usize, seed: u64) -> PowerPattern {
        use crate::stochastic::{sample_truncated_gaussian, TruncatedGaussianParams};
        let tg = TruncatedGaussianParams::from_homogeneity(0.2, 2.0).unwrap();
        let mut rng = stream_from_seed(seed);
        PowerPattern::new((0..n).map(|_| sample_truncated_gaussian(&tg, &mut rng)).collect(), 1.0).unwrap()
    }

    #[test]
    fn circulant_matches_dense_gram() {
        let pat = pattern(13, 1);
        let sigma = build_sigma(&pat, &unitary_basis(13, &Basis::Dft).unwrap()).unwrap();
        let dense = Gram::from_sigma(&sigma);
        let circ = Gram::dft_circulant(&pat.gamma).unwrap();
        for q in 0..13 {
            for l in 0..13 {
                assert!((dense.entry(q, l) - circ.entry(q, l)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn combination_walk_counts() {
        let mut s = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut s, 7) {
            count += 1;
        }
        assert_eq!(count, 35);
        assert_eq!(binomial(7, 3), 35.0);
        assert_eq!(binomial(500, 5), 255244687600.0);
    }

    #[test]
    fn exact_spectrum_dft_singletons_and_homogeneous() {
        let pat = pattern(12, 2);
        let sigma = build_sigma(&pat, &unitary_basis(12, &Basis::Dft).unwrap()).unwrap();
        let s1 = restricted_eigs_exact(&sigma, 1).unwrap();
        assert!((s1.rho_max - 1.0).abs() < 1e-12 && (s1.rho_min - 1.0).abs() < 1e-12);
        let flat = PowerPattern::new(vec![0.3; 12], 1.0).unwrap();
        let sigma = build_sigma(&flat, &unitary_basis(12, &Basis::Dft).unwrap()).unwrap();
        let s3 = restricted_eigs_exact(&sigma, 3).unwrap();
        assert!((s3.rho_max - 1.0).abs() < 1e-12 && (s3.rho_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_extremes_closed_form() {
        let pat = pattern(16, 3);
        let gram = Gram::dft_circulant(&pat.gamma).unwrap();
        let exact = restricted_eigs_exact_gram(&gram, 2, ENUMERATION_BUDGET).unwrap();
        let Gram::Circulant(c) = &gram else { unreachable!() };
        let (hi, lo) = circulant_pair_extremes(c);
        assert!((hi - exact.rho_max).abs() < 1e-12);
        assert!((lo - exact.rho_min).abs() < 1e-12);
    }

    #[test]
    fn sampled_is_bounded_by_exact_and_nested() {
        let pat = pattern(20, 4);
        let gram = Gram::dft_circulant(&pat.gamma).unwrap();
        let exact = restricted_eigs_exact_gram(&gram, 3, ENUMERATION_BUDGET).unwrap();
        let small = restricted_eigs_sampled_gram(&gram, 3, 100, &mut stream_from_seed(9)).unwrap();
        let large = restricted_eigs_sampled_gram(&gram, 3, 1000, &mut stream_from_seed(9)).unwrap();
        assert!(small.rho_max <= large.rho_max && large.rho_max <= exact.rho_max + 1e-15);
        assert!(small.rho_min >= large.rho_min && large.rho_min >= exact.rho_min - 1e-15);
        let all = restricted_eigs_sampled_gram(&gram, 3, 1140, &mut stream_from_seed(9)).unwrap();
        assert_eq!(all.rho_max, exact.rho_max);
        assert_eq!(all.method, SpectrumMethod::ExactEnumeration);
    }

    #[test]
    fn norm_expansion_matches_dense() {
        let n = 16;
        let pat = pattern(n, 5);
        let sigma = build_sigma(&pat, &unitary_basis(n, &Basis::Dft).unwrap()).unwrap();
        let mut rng = stream_from_seed(6);
        for _ in 0..20 {
            let support = rand::seq::index::sample(&mut rng, n, 3).into_vec();
            let vals: Vec<Complex64> = (0..3).map(|_| sample_complex_gaussian(1.0, &mut rng).unwrap()).collect();
            let mut v = crate::CVector::zeros(n);
            for (s, z) in support.iter().zip(&vals) {
                v[*s] = *z;
            }
            let dense = (&sigma * &v).norm_squared();
            let fast = dft_norm_sq(&pat.gamma, &support, &vals).unwrap();
            assert!((dense - fast).abs() < 1e-12 * dense);
        }
        let flat = vec![0.7; n];
        let nv = (0.6f64 * 0.6 + 0.8 * 0.8).sqrt();
        let w = dft_norm_sq(&flat, &[2, 9], &[Complex64::new(0.6 / nv, 0.0), Complex64::new(0.0, 0.8 / nv)]).unwrap();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pair_form_agrees_with_expansion() {
        let n = 24;
        let pat = pattern(n, 7);
        let (s1, s2) = (3usize, 17usize);
        let (a1, a2) = (0.6f64, 0.8f64);
        let (t1, t2) = (0.4f64, 2.1f64);
        let vals = [Complex64::from_polar(a1, t1), Complex64::from_polar(a2, t2)];
        let full = dft_norm_sq(&pat.gamma, &[s1, s2], &vals).unwrap();
        let pair = dft_norm_sq_pair(&pat.gamma, s2 - s1, (a1, a2), (t1, t2));
        assert!((full - pair).abs() < 1e-12);
    }

    #[test]
    fn cesaro_vanishes() {
        for n in [5, 16, 33] {
            for delta in 1..n {
                for theta in [0.0, 0.7, 2.5, 5.9] {
                    assert!(cesaro_mean(theta, delta, n).abs() < 1e-12);
                }
            }
        }
        assert!((cesaro_mean(0.3, 7, 7) - 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn rip_map_cases() {
        let unit = RestrictedSpectrum::unit(5);
        let r = rip_maps(&unit, 0.3).unwrap();
        assert_eq!((r.xi_k, r.zeta_k, r.beta_k), (0.0, 0.0, 0.3));

        let s = RestrictedSpectrum::new(5, 1.09, 0.88, SpectrumMethod::Sampled, 1);
        let r = rip_maps(&s, 0.307).unwrap();
        assert!((r.xi_k - 0.12).abs() < 1e-12);
        assert!((r.zeta_k - 0.03 / 0.21).abs() < 1e-12);
        assert!(0.307 > r.vartheta_k);
        assert!((r.beta_k - (1.307 / 1.09 - 1.0)).abs() < 1e-12);
        assert!(matches!(rip_maps(&s, 0.1), Err(Error::InfeasibleRic(_))));
        let wide = RestrictedSpectrum::new(5, 2.2, 0.9, SpectrumMethod::Sampled, 1);
        assert!(rip_maps(&wide, 0.5).is_err());
        let wide = RestrictedSpectrum::new(5, 2.2, 0.95, SpectrumMethod::Sampled, 1);
        assert!(rip_maps(&wide, 1.5).is_err());
    }

    #[test]
    fn rip_roundtrip_both_branches() {
        let (hi, lo) = (1.05, 0.8);
        let th = vartheta(hi, lo);
        for delta in [0.21, 0.25, th - 1e-6, th + 1e-6, 0.5, 0.9] {
            let beta = beta_from_delta(hi, lo, delta).unwrap();
            let back = delta_from_beta(hi, lo, beta).unwrap();
            assert!((back - delta).abs() < 1e-12, "{delta}: {back}");
        }
    }

    #[test]
    fn empirical_ric_isometries() {
        let psi = unitary_basis(16, &Basis::Dft).unwrap();
        let mut rng = stream_from_seed(8);
        assert!(empirical_ric(&psi, 3, 50, &mut rng).unwrap() < 1e-10);
        let doubled = &psi * Complex64::new(2.0, 0.0);
        assert!((empirical_ric(&doubled, 3, 50, &mut rng).unwrap() - 3.0).abs() < 1e-10);
    }
}
