//! Random system generators and reference computations that share no code
//! with the library's numerical kernels.

#![allow(dead_code)]

use linctl::{LtiSystem, Matrix, Vector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mat(r: usize, c: usize, v: &[f64]) -> Matrix {
    Matrix::from_row_slice(r, c, v)
}

pub fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Orthogonal factor of a random matrix.
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    uniform(rng, n, n).qr().q()
}

/// `[[A1, A2], [0, A3]]`, `[B1; 0]` rotated by a random orthogonal basis;
/// the reachable subspace has dimension `r < n`.
pub fn uncontrollable(rng: &mut impl Rng, n: usize, p: usize, r: usize) -> LtiSystem {
    let mut a = uniform(rng, n, n);
    let mut b = uniform(rng, n, p);
    for i in r..n {
        for j in 0..r {
            a[(i, j)] = 0.0;
        }
        for j in 0..p {
            b[(i, j)] = 0.0;
        }
    }
    let t = orthogonal(rng, n);
    LtiSystem::new(&t * a * t.transpose(), &t * b, None).unwrap()
}

/// Largest singular value by power iteration on `MᵀM`.
pub fn two_norm(m: &Matrix) -> f64 {
    let mut v = Vector::from_element(m.ncols(), 1.0);
    let mut est = 0.0;
    for _ in 0..500 {
        let w = m.transpose() * (m * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw.sqrt();
        v = w / nw;
    }
    est * 1.000001
}

/// `M - (‖M‖₂ + margin) I`: spectral abscissa at most `-margin`.
pub fn shifted_stable(m: &Matrix, margin: f64) -> Matrix {
    let n = m.nrows();
    m - Matrix::identity(n, n) * (two_norm(m) + margin)
}

/// Truncated Taylor series; intended for `‖M‖ ≲ 0.1`.
pub fn taylor_exp(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let mut term = Matrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

/// Taylor series on `M / 2^k` followed by `k` squarings, with `‖M / 2^k‖ <= 0.05`.
pub fn reference_exp(m: &Matrix) -> Matrix {
    let norm = m.abs().row_sum().max();
    let k = if norm <= 0.05 { 0 } else { (norm / 0.05).log2().ceil() as i32 };
    let mut e = taylor_exp(&(m / 2f64.powi(k)));
    for _ in 0..k {
        e = &e * &e;
    }
    e
}

/// Characteristic polynomial `det(sI - M)` by the Faddeev–LeVerrier recursion,
/// returned as ascending coefficients `[c_0, ..., c_{n-1}]` of the monic polynomial.
pub fn charpoly(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut mk = Matrix::zeros(n, n);
    for k in 1..=n {
        mk = m * (&mk + Matrix::identity(n, n) * c[n - k + 1]);
        c[n - k] = -mk.trace() / k as f64;
    }
    c.truncate(n);
    c
}

/// Ascending monic coefficients from roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c[..roots.len()].iter().map(|z| z.re).collect()
}

/// Spectrum via nalgebra's real Schur form.
pub fn spectrum(m: &Matrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn abscissa(m: &Matrix) -> f64 {
    spectrum(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Random self-conjugate target roots with real parts in `[-3, -0.5]`.
pub fn stable_roots(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(n);
    while roots.len() < n {
        let re = rng.gen_range(-3.0..-0.5);
        if n - roots.len() >= 2 && rng.gen_bool(0.4) {
            let im = rng.gen_range(0.2..2.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    roots
}

/// Composite Simpson rule on an odd number of uniform samples.
pub fn simpson<T>(values: &[T], h: f64) -> T
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    assert!(values.len() % 2 == 1 && values.len() >= 3);
    let mut acc = values[0].clone() + values[values.len() - 1].clone();
    for (k, v) in values.iter().enumerate().take(values.len() - 1).skip(1) {
        acc = acc + v.clone() * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// `max_k |a_k - b_k| / (1 + |b_k|)`
pub fn relative_coefficient_gap(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}
