//! Small dense kernels: a cyclic Jacobi eigensolver for Hermitian matrices
//! and column-major complex matrix-vector products.

use num_complex::Complex64;

use crate::CMatrix;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Eigenvalues (ascending) of a Hermitian `k×k` matrix stored row-major in
/// `h`. The buffer is overwritten. Only the upper triangle is trusted; the
/// lower triangle is rebuilt from it.
pub fn hermitian_eigenvalues(h: &mut [Complex64], k: usize) -> Vec<f64> {
    hermitian_jacobi(h, k, None)
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// eigenvectors as columns of a row-major `k×k` buffer.
pub fn hermitian_eigen(h: &mut [Complex64], k: usize) -> (Vec<f64>, Vec<Complex64>) {
    let mut v = vec![ZERO; k * k];
    for i in 0..k {
        v[i * k + i] = Complex64::new(1.0, 0.0);
    }
    let vals = hermitian_jacobi(h, k, Some(&mut v));
    // Reorder eigenvector columns to match the ascending eigenvalues.
    let mut order: Vec<usize> = (0..k).collect();
    let diag: Vec<f64> = (0..k).map(|i| h[i * k + i].re).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let mut sorted = vec![ZERO; k * k];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..k {
            sorted[r * k + new_col] = v[r * k + old_col];
        }
    }
    (vals, sorted)
}

fn hermitian_jacobi(h: &mut [Complex64], k: usize, mut vecs: Option<&mut [Complex64]>) -> Vec<f64> {
    assert_eq!(h.len(), k * k, "buffer must be k*k");
    for i in 0..k {
        h[i * k + i].im = 0.0;
        for j in 0..i {
            h[i * k + j] = h[j * k + i].conj();
        }
    }
    if k == 1 {
        return vec![h[0].re];
    }
    let scale: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; k];
    }
    let tol = (f64::EPSILON * scale).powi(2);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..k {
            for q in (p + 1)..k {
                off += h[p * k + q].norm_sqr();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let hpq = h[p * k + q];
                let b = hpq.norm();
                if b == 0.0 {
                    continue;
                }
                // Phase to a real symmetric 2x2, then a real rotation.
                let phase = hpq / b;
                let a = h[p * k + p].re;
                let c = h[q * k + q].re;
                let tau = (c - a) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // U = [[cs, sn], [-sn e^{-iα}, cs e^{-iα}]] on (p, q).
                let u_qp = -sn * phase.conj();
                let u_qq = cs * phase.conj();
                for r in 0..k {
                    let x = h[r * k + p];
                    let y = h[r * k + q];
                    h[r * k + p] = x * cs + y * u_qp;
                    h[r * k + q] = x * sn + y * u_qq;
                }
                for r in 0..k {
                    let x = h[p * k + r];
                    let y = h[q * k + r];
                    h[p * k + r] = x * cs + y * u_qp.conj();
                    h[q * k + r] = x * sn + y * u_qq.conj();
                }
                h[p * k + q] = ZERO;
                h[q * k + p] = ZERO;
                h[p * k + p].im = 0.0;
                h[q * k + q].im = 0.0;
                if let Some(v) = vecs.as_deref_mut() {
                    for r in 0..k {
                        let x = v[r * k + p];
                        let y = v[r * k + q];
                        v[r * k + p] = x * cs + y * u_qp;
                        v[r * k + q] = x * sn + y * u_qq;
                    }
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..k).map(|i| h[i * k + i].re).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// `out = A x`, skipping zero entries of `x`.
pub fn matvec(a: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    let (m, n) = a.shape();
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), m);
    out.fill(ZERO);
    let data = a.as_slice();
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = &data[j * m..(j + 1) * m];
        for (o, &aij) in out.iter_mut().zip(col) {
            *o += aij * xj;
        }
    }
}

/// `out = Aᴴ r`.
pub fn adjoint_matvec(a: &CMatrix, r: &[Complex64], out: &mut [Complex64]) {
    let (m, n) = a.shape();
    debug_assert_eq!(r.len(), m);
    debug_assert_eq!(out.len(), n);
    let data = a.as_slice();
    for (j, o) in out.iter_mut().enumerate() {
        let col = &data[j * m..(j + 1) * m];
        let mut re = 0.0;
        let mut im = 0.0;
        for (c, v) in col.iter().zip(r) {
            // conj(c) * v
            re += c.re * v.re + c.im * v.im;
            im += c.re * v.im - c.im * v.re;
        }
        *o = Complex64::new(re, im);
    }
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Largest eigenvalue of `AᴴA` by power iteration.
pub fn spectral_norm_sqr(a: &CMatrix, iterations: usize, rel_tol: f64) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    // Deterministic start with energy on every coordinate.
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + 0.01 * (j % 7) as f64, 0.003 * (j % 5) as f64))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut av = vec![ZERO; m];
    let mut w = vec![ZERO; n];
    let mut est = 0.0;
    for _ in 0..iterations {
        matvec(a, &v, &mut av);
        adjoint_matvec(a, &av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw;
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
        if (next - est).abs() <= rel_tol * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;
    use crate::stochastic::sample_complex_gaussian;

    fn random_hermitian(k: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = stream_from_seed(seed);
        let mut h = vec![ZERO; k * k];
        for i in 0..k {
            for j in i..k {
                let z = sample_complex_gaussian(1.0, &mut rng).unwrap();
                h[i * k + j] = if i == j { Complex64::new(z.re, 0.0) } else { z };
                h[j * k + i] = h[i * k + j].conj();
            }
        }
        h
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        for k in [1, 2, 3, 5, 10, 17] {
            let h = random_hermitian(k, 100 + k as u64);
            let dense = CMatrix::from_row_slice(k, k, &h);
            let mut oracle: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(f64::total_cmp);
            let mut buf = h.clone();
            let vals = hermitian_eigenvalues(&mut buf, k);
            for (a, b) in vals.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let k = 6;
        let h = random_hermitian(k, 7);
        let mut buf = h.clone();
        let (vals, v) = hermitian_eigen(&mut buf, k);
        let hm = CMatrix::from_row_slice(k, k, &h);
        let vm = CMatrix::from_row_slice(k, k, &v);
        let d = vm.adjoint() * hm * &vm;
        for i in 0..k {
            assert!((d[(i, i)].re - vals[i]).abs() < 1e-12);
            for j in 0..k {
                if i != j {
                    assert!(d[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matvec_pair_matches_nalgebra() {
        let mut rng = stream_from_seed(3);
        let a = CMatrix::from_fn(7, 5, |_, _| sample_complex_gaussian(1.0, &mut rng).unwrap());
        let x: Vec<Complex64> = (0..5).map(|_| sample_complex_gaussian(1.0, &mut rng).unwrap()).collect();
        let r: Vec<Complex64> = (0..7).map(|_| sample_complex_gaussian(1.0, &mut rng).unwrap()).collect();
        let mut ax = vec![ZERO; 7];
        matvec(&a, &x, &mut ax);
        let ax_ref = &a * crate::CVector::from_column_slice(&x);
        let mut ahr = vec![ZERO; 5];
        adjoint_matvec(&a, &r, &mut ahr);
        let ahr_ref = a.adjoint() * crate::CVector::from_column_slice(&r);
        for i in 0..7 {
            assert!((ax[i] - ax_ref[i]).norm() < 1e-12);
        }
        for j in 0..5 {
            assert!((ahr[j] - ahr_ref[j]).norm() < 1e-12);
        }
        let l = spectral_norm_sqr(&a, 200, 1e-12);
        let s = a.singular_values();
        assert!((l - s[0] * s[0]).abs() < 1e-8 * l);
    }
}
