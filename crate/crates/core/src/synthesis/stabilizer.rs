use crate::numkernel::{check_finite, check_square, numerical_rank, solve_sylvester, symmetrize, Matrix, ToleranceConfig};
use crate::reachability::kalman_matrix;
use crate::stability::spectral_abscissa;
use crate::{ControlError, Result};

const LAMBDA_MARGIN: f64 = 1e-6;

/// Feedback `K = -Bᵀ P` with `P = Q⁻¹`, where `Q` is the exponentially
/// weighted Gramian `∫_0^∞ e^{-2λt} e^{-tA} B Bᵀ e^{-tAᵀ} dt`.
#[derive(Debug, Clone)]
pub struct GramianStabilizer {
    pub lambda: f64,
    pub q: Matrix,
    pub p: Matrix,
    pub k: Matrix,
    /// `‖PA + AᵀP + 2λP - PBBᵀP‖_F` relative to the size of its terms.
    pub riccati_residual: f64,
    /// `ω(A + BK)`, at most `-λ`.
    pub closed_loop_abscissa: f64,
}

/// Smallest `λ` accepted by [`gramian_stabilizer`]: `max(0, ω(-A))` plus a small margin.
pub fn minimal_lambda(a: &Matrix) -> Result<f64> {
    Ok(spectral_abscissa(&(-a))?.max(0.0) + LAMBDA_MARGIN)
}

pub fn gramian_stabilizer(a: &Matrix, b: &Matrix, lambda: f64, cfg: &ToleranceConfig) -> Result<GramianStabilizer> {
    check_square(a, "A")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(ControlError::Dimension(format!("B has {} rows, A is {n}x{n}", b.nrows())));
    }
    check_finite(a, "A")?;
    check_finite(b, "B")?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(ControlError::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let rank = numerical_rank(&kalman_matrix(a, b), cfg);
    if rank < n {
        return Err(ControlError::Uncontrollable { rank, n });
    }
    let min_lambda = minimal_lambda(a)?;
    if lambda < min_lambda {
        return Err(ControlError::LambdaTooSmall { lambda, min_lambda });
    }

    let shifted = a + Matrix::identity(n, n) * lambda;
    let bbt = b * b.transpose();
    let q = symmetrize(&solve_sylvester(&shifted, &shifted.transpose(), &bbt, cfg)?);
    let p = q
        .clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| ControlError::Conditioning("weighted Gramian is not positive definite".into()))?;
    let inverse_error = (&p * &q - Matrix::identity(n, n)).norm();
    if inverse_error > cfg.residual_tol * (1.0 + p.norm() * q.norm()) {
        return Err(ControlError::Conditioning(format!("weighted Gramian inverse error {inverse_error:e}")));
    }
    let k = -b.transpose() * &p;
    let pb = &p * b;
    let terms = [&p * a, a.transpose() * &p, &p * (2.0 * lambda), &pb * pb.transpose()];
    let scale = 1.0 + terms.iter().map(|t| t.norm()).sum::<f64>();
    let riccati_residual = (&terms[0] + &terms[1] + &terms[2] - &terms[3]).norm() / scale;
    let closed_loop_abscissa = spectral_abscissa(&(a + b * &k))?;
    if closed_loop_abscissa > -lambda + LAMBDA_MARGIN {
        return Err(ControlError::Numerical(format!(
            "closed-loop abscissa {closed_loop_abscissa:e} exceeds -lambda = {:e}",
            -lambda
        )));
    }
    Ok(GramianStabilizer { lambda, q, p, k, riccati_residual, closed_loop_abscissa })
}
