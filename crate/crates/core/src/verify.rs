//! Oracle suite: each routine is compared with an independent computation
//! (quadrature, dense linear algebra, brute-force enumeration).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::ensemble::{build_sigma, unitary_basis, Basis, PowerPattern};
use crate::error::Result;
use crate::linalg::hermitian_eigenvalues;
use crate::rng::{stream_from_seed, Stream};
use crate::spectra::{
    beta_from_delta, binomial, delta_from_beta, dft_norm_sq, next_combination, restricted_eigs_exact, vartheta, xi,
};
use crate::stochastic::{sample_complex_gaussian, sample_truncated_gaussian, truncated_gaussian_cgf, TruncatedGaussianParams};
use crate::theory::{achievable_delay_detail, measurement_bound, mse_threshold, BoundConstants, DelayQuery};
use crate::spectra::{RestrictedSpectrum, SpectrumMethod};
use crate::CMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed error (absolute or relative, per check).
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, max_error: f64, tolerance: f64, cases: usize, detail: String) -> Self {
        CheckResult { name: name.into(), passed: max_error <= tolerance, max_error, tolerance, cases, detail }
    }
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || err <= 64.0 * f64::EPSILON * v.abs() || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    let (coarse, _) = gk15(f, a, b);
    rec(f, a, b, (rel_tol * coarse.abs()).max(1e-300), 30)
}

/// Truncated-Gaussian mean, variance and CGF against quadrature of the
/// density. Relative error; CGF over `s ∈ [−40, 40]`.
pub fn truncated_gaussian_moments() -> Vec<CheckResult> {
    let mut mean_err: f64 = 0.0;
    let mut var_err: f64 = 0.0;
    let mut cgf_err: f64 = 0.0;
    let mut cases = 0;
    for &mu in &[0.05, 0.2, 1.0, 3.0] {
        for &d in &[0.25, 0.5, 1.0, 2.0, 3.0, 6.0] {
            let tg = TruncatedGaussianParams::from_homogeneity(mu, d).expect("valid parameters");
            let w = tg.omega();
            let hi = mu + 40.0 * w;
            let pdf = |x: f64| tg.pdf(x);
            let mass = integrate(&pdf, 0.0, hi, 1e-12);
            let m1 = integrate(&|x| x * tg.pdf(x), 0.0, hi, 1e-12) / mass;
            let m2 = integrate(&|x| (x - m1).powi(2) * tg.pdf(x), 0.0, hi, 1e-12) / mass;
            mean_err = mean_err.max((tg.mean() - m1).abs() / m1);
            var_err = var_err.max((tg.variance() - m2).abs() / m2);
            // ln of the density, straight from its definition.
            let log_norm = (w * (2.0 * std::f64::consts::PI).sqrt() * crate::special::normal_cdf(d)).ln();
            let ln_pdf = |x: f64| -0.5 * ((x - mu) / w).powi(2) - log_norm;
            for &s in &[-40.0, -5.0, -0.5, 0.3, 2.0, 10.0, 40.0] {
                // Peak of the tilted density and a window holding its mass.
                let c = mu + s * w * w;
                let x_star = c.max(0.0);
                let top = if c >= 0.0 { c + 40.0 * w } else { (40.0 * w * w / -c).min(40.0 * w) };
                let peak = s * x_star + ln_pdf(x_star);
                let q = integrate(&|x| (s * x + ln_pdf(x) - peak).exp(), 0.0, top, 1e-12);
                let reference = q.ln() + peak;
                let value = truncated_gaussian_cgf(&tg, s);
                cgf_err = cgf_err.max((value - reference).abs() / reference.abs().max(1.0));
                cases += 1;
            }
        }
    }
    vec![
        CheckResult::new("truncated-gaussian mean vs quadrature", mean_err, 1e-10, 24, "relative error".into()),
        CheckResult::new("truncated-gaussian variance vs quadrature", var_err, 1e-9, 24, "relative error".into()),
        CheckResult::new("truncated-gaussian CGF vs quadrature", cgf_err, 1e-8, cases, "relative error, |s| <= 40".into()),
    ]
}

fn random_gamma(n: usize, rng: &mut Stream) -> Vec<f64> {
    let d = [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)];
    let tg = TruncatedGaussianParams::from_homogeneity(0.2, d).expect("valid parameters");
    (0..n).map(|_| sample_truncated_gaussian(&tg, rng)).collect()
}

/// Restricted eigenvalues of `instances` DFT patterns with `n ≤ 20`,
/// `k ≤ 4` stay inside `[1, k]` and `[0, 1]`.
pub fn restricted_eigenvalue_bounds(instances: usize, seed: u64, tol: f64) -> Result<CheckResult> {
    let mut rng = stream_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(9..=20);
        let k = rng.random_range(1..=4);
        let pattern = PowerPattern::new(random_gamma(n, &mut rng), 0.0)?;
        let sigma = build_sigma(&pattern, &unitary_basis(n, &Basis::Dft)?)?;
        let s = restricted_eigs_exact(&sigma, k)?;
        let violation = [
            1.0 - s.rho_max,
            s.rho_max - k as f64,
            -s.rho_min,
            s.rho_min - 1.0,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(violation);
    }
    Ok(CheckResult::new(
        "restricted eigenvalues within [1, k] and [0, 1]",
        worst,
        tol,
        instances,
        "largest bound violation".into(),
    ))
}

/// Exact enumeration against an independent dense eigensolver on every
/// support, for instances with `C(n, k) ≤ max_supports`.
pub fn exact_vs_bruteforce(instances: usize, seed: u64, max_supports: f64, tol: f64) -> Result<CheckResult> {
    let mut rng = stream_from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut supports_total = 0.0;
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(4..=24);
        let k = rng.random_range(1..=4.min(n - 1));
        if binomial(n, k) > max_supports {
            continue;
        }
        let basis = if rng.random::<bool>() { Basis::Dft } else { Basis::Dct };
        let pattern = PowerPattern::new(random_gamma(n, &mut rng), 0.0)?;
        let sigma = build_sigma(&pattern, &unitary_basis(n, &basis)?)?;
        let s = restricted_eigs_exact(&sigma, k)?;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut support: Vec<usize> = (0..k).collect();
        loop {
            let cols: Vec<_> = support.iter().map(|&j| sigma.column(j).into_owned()).collect();
            let st = CMatrix::from_columns(&cols);
            let g = st.adjoint() * &st;
            let e = g.symmetric_eigen().eigenvalues;
            hi = hi.max(e.max());
            lo = lo.min(e.min());
            supports_total += 1.0;
            if !next_combination(&mut support, n) {
                break;
            }
        }
        worst = worst.max((s.rho_max - hi).abs()).max((s.rho_min - lo).abs());
        done += 1;
    }
    Ok(CheckResult::new(
        "exact enumeration vs dense per-support eigensolver",
        worst,
        tol,
        instances,
        format!("{supports_total} supports, absolute error"),
    ))
}

/// The `O(nk²)` DFT norm expansion against `‖Σv‖²` with a dense `Σ`.
pub fn norm_expansion_vs_dense(instances: usize, vectors: usize, seed: u64, tol: f64) -> Result<CheckResult> {
    let mut rng = stream_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(8..=64);
        let pattern = PowerPattern::new(random_gamma(n, &mut rng), 0.0)?;
        let sigma = build_sigma(&pattern, &unitary_basis(n, &Basis::Dft)?)?;
        for _ in 0..vectors {
            let k = rng.random_range(1..=6.min(n / 2));
            let support = rand::seq::index::sample(&mut rng, n, k).into_vec();
            let values: Vec<Complex64> =
                (0..k).map(|_| sample_complex_gaussian(1.0, &mut rng)).collect::<Result<_>>()?;
            let mut v = crate::CVector::zeros(n);
            for (&s, &x) in support.iter().zip(&values) {
                v[s] = x;
            }
            let dense = (&sigma * v).norm_squared();
            let fast = dft_norm_sq(&pattern.gamma, &support, &values)?;
            worst = worst.max((fast - dense).abs() / dense);
        }
    }
    Ok(CheckResult::new(
        "DFT norm expansion vs dense product",
        worst,
        tol,
        instances * vectors,
        "relative error".into(),
    ))
}

/// Homogeneous patterns give `ρ_max = ρ_min = 1` and `β_k = δ_k` exactly.
pub fn homogeneous_degeneracy(tol: f64) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (n, k) in [(12, 2), (16, 3), (20, 4)] {
        for basis in [Basis::Dft, Basis::Dct, Basis::Identity] {
            let pattern = PowerPattern::new(vec![0.37; n], 0.0)?;
            let sigma = build_sigma(&pattern, &unitary_basis(n, &basis)?)?;
            let s = restricted_eigs_exact(&sigma, k)?;
            worst = worst.max((s.rho_max - 1.0).abs()).max((s.rho_min - 1.0).abs());
            cases += 1;
        }
    }
    let mut beta_mismatch = 0usize;
    let grid = 1000;
    for i in 1..=grid {
        let delta = i as f64 / (grid + 1) as f64;
        if beta_from_delta(1.0, 1.0, delta) != Some(delta) {
            beta_mismatch += 1;
        }
    }
    Ok(vec![
        CheckResult::new("homogeneous pattern has unit restricted spectrum", worst, tol, cases, "absolute error".into()),
        CheckResult::new(
            "homogeneous modified RIC equals RIC",
            beta_mismatch as f64,
            0.0,
            grid,
            "grid points where beta != delta bit-for-bit".into(),
        ),
    ])
}

/// `δ ↦ β ↦ δ` on both branches for a grid of spectra.
pub fn ric_roundtrip(tol: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &(hi, lo) in &[(1.09, 0.88), (1.3, 0.6), (1.01, 0.99), (2.0, 0.3)] {
        let lower = xi(hi, lo);
        let theta = vartheta(hi, lo);
        for i in 1..200 {
            let delta = lower + (1.0 - lower) * i as f64 / 200.0;
            if (delta - theta).abs() < 1e-12 {
                continue;
            }
            if let Some(beta) = beta_from_delta(hi, lo, delta) {
                if let Some(back) = delta_from_beta(hi, lo, beta) {
                    worst = worst.max((back - delta).abs());
                    cases += 1;
                }
            }
        }
    }
    CheckResult::new("RIC map round trip", worst, tol, cases, "absolute error".into())
}

/// Jacobi eigenvalues against nalgebra on random Hermitian matrices.
pub fn eigensolver_vs_nalgebra(seed: u64, tol: f64) -> Result<CheckResult> {
    let mut rng = stream_from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 1..=12 {
        for _ in 0..10 {
            let mut h = vec![Complex64::new(0.0, 0.0); k * k];
            for i in 0..k {
                for j in i..k {
                    let z = sample_complex_gaussian(1.0, &mut rng)?;
                    h[i * k + j] = if i == j { Complex64::new(z.re, 0.0) } else { z };
                    h[j * k + i] = h[i * k + j].conj();
                }
            }
            let dense = DMatrix::from_row_slice(k, k, &h);
            let mut reference: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let vals = hermitian_eigenvalues(&mut h, k);
            for (a, b) in vals.iter().zip(&reference) {
                worst = worst.max((a - b).abs());
            }
            cases += 1;
        }
    }
    Ok(CheckResult::new("Jacobi eigensolver vs nalgebra", worst, tol, cases, "absolute error".into()))
}

/// Delay equals the measurement bound at `β̃` on a `points × points`
/// `(ε, SNR)` grid, is infinite up to `ε_th`, and decreases above it.
pub fn delay_composition(points: usize, tol: f64) -> Result<Vec<CheckResult>> {
    let spectrum = RestrictedSpectrum::new(5, 1.09, 0.88, SpectrumMethod::ExactEnumeration, 0);
    let constants = BoundConstants::default();
    let (n, k, p) = (500, 5, 0.8);
    let mut worst: f64 = 0.0;
    let mut finite = 0;
    let mut inf_violations = 0;
    let mut monotone_violations = 0;
    for si in 0..points {
        let snr_db = 10.0 + 30.0 * si as f64 / (points - 1).max(1) as f64;
        let snr = 10f64.powf(snr_db / 10.0);
        let th = mse_threshold(snr);
        let mut prev = f64::INFINITY;
        for ei in 0..points {
            // Log grid from ε_th/10 to 100·ε_th.
            let eps = th * 10f64.powf(-1.0 + 3.0 * ei as f64 / (points - 1).max(1) as f64);
            let q = DelayQuery { epsilon: eps, snr_ave: snr, spectrum, k, n, p, constants };
            let e = achievable_delay_detail(&q)?;
            if eps <= th && e.delay.is_finite() {
                inf_violations += 1;
            }
            if let Some(beta) = e.beta_tilde {
                let direct = measurement_bound(k, n, p, beta, &spectrum, &constants)?;
                worst = worst.max((e.delay - direct).abs() / direct);
                finite += 1;
            }
            if eps > th && e.delay > prev {
                monotone_violations += 1;
            }
            if eps > th {
                prev = e.delay;
            }
        }
    }
    Ok(vec![
        CheckResult::new("delay equals bound at mapped RIC", worst, tol, finite, "relative error".into()),
        CheckResult::new(
            "delay infinite at or below threshold",
            inf_violations as f64,
            0.0,
            points * points,
            "finite delays at eps <= eps_th".into(),
        ),
        CheckResult::new(
            "delay non-increasing above threshold",
            monotone_violations as f64,
            0.0,
            points * points,
            "increases along eps".into(),
        ),
    ])
}

/// The full suite at moderate sizes.
pub fn run_oracle_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = truncated_gaussian_moments();
    out.push(eigensolver_vs_nalgebra(seed, 1e-12)?);
    out.push(restricted_eigenvalue_bounds(100, seed, 1e-9)?);
    out.push(exact_vs_bruteforce(40, seed, 1e4, 1e-10)?);
    out.push(norm_expansion_vs_dense(10, 50, seed, 1e-10)?);
    out.extend(homogeneous_degeneracy(1e-10)?);
    out.push(ric_roundtrip(1e-12));
    out.extend(delay_composition(40, 1e-12)?);
    Ok(out)
}
