use super::{eigenvalues, Matrix, ToleranceConfig};
use crate::{ControlError, Result};

pub fn check_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(ControlError::Dimension(format!(
            "{what} expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn check_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ControlError::NonFinite(what.to_string()))
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

/// Spectral norm (largest singular value).
pub fn induced_two_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn symmetric_eigen_min(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    symmetrize(a).symmetric_eigenvalues().min()
}

/// Number of singular values above `rank_rtol * max(rows, cols) * sigma_max`.
pub fn numerical_rank(a: &Matrix, cfg: &ToleranceConfig) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    let cutoff = cfg.rank_rtol * a.nrows().max(a.ncols()) as f64 * smax;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal bases of `range(a)` and of its orthogonal complement in `R^rows`,
/// with the range dimension decided by [`numerical_rank`]'s cutoff.
///
/// The bases come from a Householder QR factorization with column pivoting,
/// whose leading `rank` columns of `Q` span the numerical range.
pub fn orthonormal_split(a: &Matrix, cfg: &ToleranceConfig) -> (Matrix, Matrix) {
    let n = a.nrows();
    if n == 0 {
        return (Matrix::zeros(0, 0), Matrix::zeros(0, 0));
    }
    // zero columns pad a tall input so that Q is a full n×n orthogonal factor
    let padded = if a.ncols() < n {
        let mut p = Matrix::zeros(n, n);
        p.view_mut((0, 0), (n, a.ncols())).copy_from(a);
        p
    } else {
        a.clone()
    };
    let rank = numerical_rank(a, cfg);
    let q = padded.col_piv_qr().q();
    (q.columns(0, rank).into_owned(), q.columns(rank, n - rank).into_owned())
}

/// Solves `A X + X Bm = R` through the vectorized `(I ⊗ A + Bmᵀ ⊗ I) vec(X) = vec(R)`.
pub fn solve_sylvester(a: &Matrix, bm: &Matrix, r: &Matrix, cfg: &ToleranceConfig) -> Result<Matrix> {
    check_square(a, "Sylvester coefficient A")?;
    check_square(bm, "Sylvester coefficient B")?;
    let n = a.nrows();
    let k = bm.nrows();
    if r.nrows() != n || r.ncols() != k {
        return Err(ControlError::Dimension(format!(
            "Sylvester right-hand side must be {n}x{k}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    check_finite(a, "Sylvester coefficient A")?;
    check_finite(bm, "Sylvester coefficient B")?;
    check_finite(r, "Sylvester right-hand side")?;
    if n == 0 || k == 0 {
        return Ok(Matrix::zeros(n, k));
    }

    let ea = eigenvalues(a)?;
    let eb = eigenvalues(bm)?;
    let separation = ea
        .iter()
        .flat_map(|l| eb.iter().map(move |m| (l + m).norm()))
        .fold(f64::INFINITY, f64::min);
    if separation <= cfg.residual_tol {
        return Err(ControlError::SingularEquation { separation });
    }

    let dim = n * k;
    let mut big = Matrix::zeros(dim, dim);
    // column-major vec: X[(i, j)] ↦ j * n + i
    for j in 0..k {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                big[(row, j * n + l)] += a[(i, l)];
            }
            for l in 0..k {
                big[(row, l * n + i)] += bm[(l, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(dim, r.iter().copied());
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or(ControlError::SingularEquation { separation })?;
    let x = Matrix::from_column_slice(n, k, sol.as_slice());

    let residual = (a * &x + &x * bm - r).norm();
    if residual > cfg.residual_tol * (1.0 + r.norm()) {
        return Err(ControlError::Numerical(format!(
            "Sylvester residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(x)
}
