//! Stability verdicts from the spectral abscissa and Lyapunov certificates.

use crate::numkernel::{
    check_square, eigenvalues, expm, induced_two_norm, numerical_rank, solve_sylvester, symmetric_eigen_min,
    symmetrize, Matrix, ToleranceConfig,
};
use crate::observability::observability_matrix;
use crate::{ControlError, Result};

/// `ω(A) < -STABILITY_MARGIN` declares stability; `|ω(A)| <= STABILITY_MARGIN` is marginal.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Spectral abscissa `ω(A)`.
    pub omega: f64,
    pub stable: bool,
    pub marginal: bool,
    /// Solution of `Aᵀ Q + Q A = -R`, when certified.
    pub lyapunov_q: Option<Matrix>,
    /// Frobenius norm of `Aᵀ Q + Q A + R`.
    pub residual: f64,
}

/// Largest real part over the spectrum of `A`.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.max_real())
}

pub fn assess(a: &Matrix) -> Result<StabilityReport> {
    let omega = spectral_abscissa(a)?;
    Ok(StabilityReport {
        omega,
        stable: omega < -STABILITY_MARGIN,
        marginal: omega.abs() <= STABILITY_MARGIN,
        lyapunov_q: None,
        residual: 0.0,
    })
}

fn check_symmetric(r: &Matrix, what: &str) -> Result<()> {
    let asym = (r - r.transpose()).norm();
    if asym > 1e-10 * (1.0 + r.norm()) {
        return Err(ControlError::InvalidInput(format!("{what} is not symmetric (asymmetry {asym:e})")));
    }
    Ok(())
}

/// Solves `Aᵀ Q + Q A = -R` for stable `A`.
pub fn lyapunov_certificate(a: &Matrix, r: &Matrix, cfg: &ToleranceConfig) -> Result<StabilityReport> {
    check_square(a, "A")?;
    if r.shape() != a.shape() {
        return Err(ControlError::Dimension(format!("R is {:?}, A is {:?}", r.shape(), a.shape())));
    }
    check_symmetric(r, "R")?;
    let mut report = assess(a)?;
    if !report.stable {
        return Err(ControlError::NoCertificate { omega: report.omega });
    }
    let q = symmetrize(&solve_sylvester(&a.transpose(), a, &(-r), cfg)?);
    report.residual = (a.transpose() * &q + &q * a + r).norm();
    report.lyapunov_q = Some(q);
    Ok(report)
}

/// With `(A, C)` observable and `R = CᵀC`, a symmetric nonnegative solution of
/// the Lyapunov equation forces `A` to be stable. Returns whether `q_candidate`
/// is such a solution.
pub fn lyapunov_stability_test(a: &Matrix, c: &Matrix, q_candidate: &Matrix, cfg: &ToleranceConfig) -> Result<bool> {
    check_square(a, "A")?;
    let n = a.nrows();
    if c.ncols() != n || q_candidate.shape() != (n, n) {
        return Err(ControlError::Dimension("C or Q incompatible with A".into()));
    }
    let rank = numerical_rank(&observability_matrix(a, c), cfg);
    if rank < n {
        return Err(ControlError::Unobservable { rank, n });
    }
    check_symmetric(q_candidate, "Q")?;
    let min_eig = symmetric_eigen_min(q_candidate);
    if min_eig < -1e-10 * (1.0 + q_candidate.norm()) {
        return Err(ControlError::Precondition(format!("Q is not nonnegative (min eigenvalue {min_eig:e})")));
    }
    let r = c.transpose() * c;
    let residual = (a.transpose() * q_candidate + q_candidate * a + &r).norm();
    let solves = residual <= cfg.residual_tol * (1.0 + r.norm());
    let stable = assess(a)?.stable;
    if solves && !stable {
        return Err(ControlError::InconsistentVerdicts(format!(
            "nonnegative Lyapunov solution (residual {residual:e}) for an unstable matrix"
        )));
    }
    Ok(solves && stable)
}

/// Smallest `C` with `‖e^{tA}‖ <= C e^{(ω + ε) t}` on a uniform grid of `[0, horizon]`.
pub fn measured_decay_constant(a: &Matrix, epsilon: f64, horizon: f64, samples: usize) -> Result<f64> {
    let omega = spectral_abscissa(a)?;
    let samples = samples.max(1);
    let h = horizon / samples as f64;
    let step = expm(&(a * h))?;
    let mut e = Matrix::identity(a.nrows(), a.nrows());
    let mut c: f64 = 1.0;
    for k in 1..=samples {
        e = &e * &step;
        let t = k as f64 * h;
        c = c.max(induced_two_norm(&e) * (-(omega + epsilon) * t).exp());
    }
    Ok(c)
}
