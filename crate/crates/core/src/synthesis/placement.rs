use crate::numkernel::{check_finite, check_square, eigenvalues, numerical_rank, ComplexScalarList, Matrix, ToleranceConfig, Vector};
use crate::reachability::kalman_matrix;
use crate::{ControlError, Result};

use super::poly::{characteristic_polynomial, MonicPolynomial};

/// Controller form `A♯ = T⁻¹ A T`, `b♯ = T⁻¹ b = e_n` of a single-input pair.
#[derive(Debug, Clone)]
pub struct ControllerForm {
    pub a_sharp: Matrix,
    pub b_sharp: Vector,
    pub t: Matrix,
    /// `χ_A`, whose `α` fill the last row of `A♯`.
    pub chi: MonicPolynomial,
}

#[derive(Debug, Clone)]
pub struct FeedbackGain {
    pub f: Matrix,
    pub achieved_spectrum: ComplexScalarList,
    /// Relative coefficient distance of `χ_{A+BF}` to the target.
    pub residual: f64,
}

fn check_pair(a: &Matrix, b: &Matrix) -> Result<()> {
    check_square(a, "A")?;
    if b.nrows() != a.nrows() {
        return Err(ControlError::Dimension(format!("B has {} rows, A is {}x{}", b.nrows(), a.nrows(), a.nrows())));
    }
    check_finite(a, "A")?;
    check_finite(b, "B")
}

fn require_controllable(a: &Matrix, b: &Matrix, cfg: &ToleranceConfig) -> Result<()> {
    let n = a.nrows();
    let rank = numerical_rank(&kalman_matrix(a, b), cfg);
    if rank < n {
        return Err(ControlError::Uncontrollable { rank, n });
    }
    Ok(())
}

pub fn controller_form(a: &Matrix, b: &Vector, cfg: &ToleranceConfig) -> Result<ControllerForm> {
    let bm = Matrix::from_column_slice(b.len(), 1, b.as_slice());
    check_pair(a, &bm)?;
    require_controllable(a, &bm, cfg)?;
    let n = a.nrows();
    let chi = characteristic_polynomial(a)?;
    let a_sharp = chi.companion();
    let mut b_sharp = Vector::zeros(n);
    b_sharp[n - 1] = 1.0;
    let bs = Matrix::from_column_slice(n, 1, b_sharp.as_slice());
    // A R(A, b) = R(A, b) Â and the same for (A♯, e_n), so T = R(A, b) R(A♯, e_n)⁻¹.
    let r = kalman_matrix(a, &bm);
    let r_sharp = kalman_matrix(&a_sharp, &bs);
    let t = r_sharp
        .transpose()
        .lu()
        .solve(&r.transpose())
        .ok_or_else(|| ControlError::Conditioning("controller-form Kalman matrix is singular".into()))?
        .transpose();
    Ok(ControllerForm { a_sharp, b_sharp, t, chi })
}

fn single_input(a: &Matrix, b: &Vector, target: &MonicPolynomial, cfg: &ToleranceConfig) -> Result<Matrix> {
    let cf = controller_form(a, b, cfg)?;
    let n = a.nrows();
    // A♯ + e_n f♯ has last row α + f♯, so f♯ = β - α.
    let f_sharp = Matrix::from_fn(1, n, |_, j| target.alphas()[j] - cf.chi.alphas()[j]);
    // F = f♯ T⁻¹, solved as Tᵀ Fᵀ = f♯ᵀ
    let ft = cf
        .t
        .transpose()
        .lu()
        .solve(&f_sharp.transpose())
        .ok_or_else(|| ControlError::Conditioning("controller-form similarity is singular".into()))?;
    Ok(ft.transpose())
}

/// Relative part of `c` orthogonal to the span of `basis` columns (orthonormal).
fn novelty(c: &Vector, basis: &[Vector]) -> f64 {
    let norm = c.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut r = c.clone();
    for q in basis {
        r -= q * q.dot(&r);
    }
    r.norm() / norm
}

fn orthonormal_append(basis: &mut Vec<Vector>, c: &Vector) {
    let mut r = c.clone();
    for _ in 0..2 {
        for q in basis.iter() {
            r -= q * q.dot(&r);
        }
    }
    basis.push(r.normalize());
}

// Feedback F₁ and input direction v such that (A + B F₁, B v) is controllable.
// The chain starts from input `j0`; `greedy` takes the candidate extending the
// span the most instead of the first one that extends it clearly.
fn heymann_reduction(a: &Matrix, b: &Matrix, j0: usize, greedy: bool, cfg: &ToleranceConfig) -> Result<(Matrix, Vector)> {
    let n = a.nrows();
    let p = b.ncols();
    let mut v = Vector::zeros(p);
    v[j0] = 1.0;

    let stall = cfg.rank_rtol * n as f64;
    let mut xs: Vec<Vector> = vec![b.column(j0).into_owned()];
    let mut us: Vec<Vector> = Vec::with_capacity(n);
    let mut basis = Vec::with_capacity(n);
    orthonormal_append(&mut basis, &xs[0]);
    while xs.len() < n {
        let ax = a * xs.last().unwrap();
        let candidates: Vec<(usize, Vector, f64)> = (0..p)
            .map(|j| {
                let c = &ax + b.column(j);
                let nov = novelty(&c, &basis);
                (j, c, nov)
            })
            .collect();
        // the first candidate that clearly extends the span, else the best one
        let best = candidates.iter().map(|c| c.2).fold(0.0, f64::max);
        if best <= stall {
            return Err(ControlError::Conditioning(format!(
                "input chain stalled at length {} of {n}",
                xs.len()
            )));
        }
        let threshold = if greedy { best } else { 1e-3 * best };
        let (j, c, _) = candidates.into_iter().find(|c| c.2 >= threshold).expect("best candidate qualifies");
        let mut u = Vector::zeros(p);
        u[j] = 1.0;
        us.push(u);
        orthonormal_append(&mut basis, &c);
        xs.push(c);
    }
    // F₁ x_i = u_i for i < n and F₁ x_n = 0
    us.push(Vector::zeros(p));
    let x = Matrix::from_columns(&xs);
    let u = Matrix::from_columns(&us);
    let f1t = x
        .transpose()
        .lu()
        .solve(&u.transpose())
        .ok_or_else(|| ControlError::Conditioning("input chain basis is singular".into()))?;
    Ok((f1t.transpose(), v))
}

/// Feedback `F` with `χ_{A+BF}` equal to `target`.
pub fn pole_place(a: &Matrix, b: &Matrix, target: &MonicPolynomial, cfg: &ToleranceConfig) -> Result<FeedbackGain> {
    let gain = place_best(a, b, target, cfg)?;
    if gain.residual > cfg.residual_tol {
        return Err(ControlError::Conditioning(format!(
            "placed characteristic polynomial misses the target by {:e}",
            gain.residual
        )));
    }
    Ok(gain)
}

/// Like [`pole_place`] but returns the most accurate gain found even when its
/// residual exceeds the tolerance.
pub(crate) fn place_best(a: &Matrix, b: &Matrix, target: &MonicPolynomial, cfg: &ToleranceConfig) -> Result<FeedbackGain> {
    check_pair(a, b)?;
    let n = a.nrows();
    if target.degree() != n {
        return Err(ControlError::Dimension(format!("target has degree {}, system order is {n}", target.degree())));
    }
    require_controllable(a, b, cfg)?;
    if n == 0 {
        return Ok(FeedbackGain { f: Matrix::zeros(b.ncols(), 0), achieved_spectrum: ComplexScalarList(vec![]), residual: 0.0 });
    }
    if b.ncols() == 1 {
        return measured_gain(a, b, single_input(a, &b.column(0).into_owned(), target, cfg)?, target);
    }

    // Every usable starting input and both candidate rules give a valid chain;
    // they differ only in conditioning, so the first accurate gain wins.
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let starts: Vec<usize> = (0..b.ncols()).filter(|&j| b.column(j).norm() > cfg.rank_rtol * scale).collect();
    if starts.is_empty() {
        return Err(ControlError::Uncontrollable { rank: 0, n });
    }
    let mut best: Option<FeedbackGain> = None;
    let mut last_err = None;
    for greedy in [false, true] {
        for &j0 in &starts {
            let attempt = heymann_reduction(a, b, j0, greedy, cfg).and_then(|(f1, v)| {
                let a1 = a + b * &f1;
                let f = single_input(&a1, &(b * &v), target, cfg)?;
                measured_gain(a, b, f1 + &v * f, target)
            });
            match attempt {
                Ok(gain) if gain.residual <= cfg.residual_tol => return Ok(gain),
                Ok(gain) => {
                    if best.as_ref().is_none_or(|b| gain.residual < b.residual) {
                        best = Some(gain);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.expect("at least one attempt ran"))
}

fn measured_gain(a: &Matrix, b: &Matrix, f: Matrix, target: &MonicPolynomial) -> Result<FeedbackGain> {
    let closed = a + b * &f;
    let achieved_spectrum = eigenvalues(&closed)?;
    let residual = MonicPolynomial::from_roots(&achieved_spectrum.0)?.relative_distance(target);
    Ok(FeedbackGain { f, achieved_spectrum, residual })
}
