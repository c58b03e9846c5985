use num_complex::Complex64;

use crate::numkernel::{eigenvalues, Matrix};
use crate::{ControlError, Result};

/// Monic polynomial `s^n - α_n s^{n-1} - ... - α_2 s - α_1`, stored as `(α_1, ..., α_n)`.
///
/// The minus signs follow the companion-matrix convention: the controller
/// form of a pair carries exactly these `α` in its last row.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicPolynomial {
    alphas: Vec<f64>,
}

const IMAG_RESIDUE_TOL: f64 = 1e-9;

impl MonicPolynomial {
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(ControlError::NonFinite("polynomial coefficients".into()));
        }
        Ok(Self { alphas })
    }

    /// From ordinary coefficients `s^n + c_{n-1} s^{n-1} + ... + c_0`, given as `[c_0, ..., c_{n-1}]`.
    pub fn from_ascending(coeffs: &[f64]) -> Result<Self> {
        Self::from_alphas(coeffs.iter().map(|c| -c).collect())
    }

    /// `∏ (s - r_k)`. Non-real roots must come in conjugate pairs.
    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
        let mut unmatched: Vec<Complex64> = Vec::new();
        for r in roots.iter().filter(|r| r.im.abs() > IMAG_RESIDUE_TOL * scale) {
            if let Some(pos) = unmatched.iter().position(|u| (u.conj() - r).norm() <= 1e-9 * scale) {
                unmatched.swap_remove(pos);
            } else {
                unmatched.push(*r);
            }
        }
        if !unmatched.is_empty() {
            return Err(ControlError::InvalidInput(format!(
                "complex roots without conjugate partner: {unmatched:?}"
            )));
        }
        // ascending coefficients of the monic product
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        let residue = c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let mag = c.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
        if residue > IMAG_RESIDUE_TOL * mag {
            return Err(ControlError::Numerical(format!(
                "imaginary residue {residue:e} in polynomial expansion"
            )));
        }
        let n = roots.len();
        Self::from_ascending(&c[..n].iter().map(|z| z.re).collect::<Vec<_>>())
    }

    pub fn degree(&self) -> usize {
        self.alphas.len()
    }

    /// `(α_1, ..., α_n)`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `[c_0, ..., c_{n-1}]` of `s^n + c_{n-1} s^{n-1} + ... + c_0`.
    pub fn ascending(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| -a).collect()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let c = self.ascending();
        c.iter().rev().fold(Complex64::new(1.0, 0.0), |acc, ck| acc * s + ck)
    }

    /// Companion matrix with ones on the superdiagonal and last row `α`.
    pub fn companion(&self) -> Matrix {
        let n = self.degree();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            m[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            m[(n - 1, j)] = self.alphas[j];
        }
        m
    }

    pub fn roots(&self) -> Result<Vec<Complex64>> {
        Ok(eigenvalues(&self.companion())?.0)
    }

    /// `max_k |α_k - β_k| / (1 + |β_k|)` against a reference polynomial.
    pub fn relative_distance(&self, reference: &MonicPolynomial) -> f64 {
        if self.degree() != reference.degree() {
            return f64::INFINITY;
        }
        self.alphas
            .iter()
            .zip(&reference.alphas)
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max)
    }
}

/// `χ_A(s) = det(sI - A)`, expanded from the spectrum of `A`.
pub fn characteristic_polynomial(a: &Matrix) -> Result<MonicPolynomial> {
    let ev = eigenvalues(a)?;
    MonicPolynomial::from_roots(&ev.0)
}
