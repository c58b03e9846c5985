//! Observability by rank and Gramian, the duality with controllability, and
//! detectability with an explicit output-injection witness.

use num_complex::Complex64;

use crate::lti::LtiSystem;
use crate::numkernel::{check_finite, check_square, eigenvalues, numerical_rank, Matrix, ToleranceConfig};
use crate::reachability::{controllability_gramian, kalman_decomposition, kalman_test, pbh_rank, GramianReport};
use crate::stability::{spectral_abscissa, STABILITY_MARGIN};
use crate::synthesis::{place_best, MonicPolynomial};
use crate::{ControlError, Result};

#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    /// `[C; CA; ...; CA^{n-1}]`
    pub observability_matrix: Matrix,
    pub rank: usize,
    pub observable: bool,
    /// `R_T = ∫_0^T e^{tAᵀ} Cᵀ C e^{tA} dt`
    pub gramian: GramianReport,
}

#[derive(Debug, Clone)]
pub struct DetectabilityReport {
    pub detectable: bool,
    pub observable: bool,
    /// Output injection `L` with `A + LC` stable, whenever one exists.
    pub witness_l: Option<Matrix>,
}

fn check_pair(a: &Matrix, c: &Matrix) -> Result<()> {
    check_square(a, "A")?;
    if c.ncols() != a.nrows() {
        return Err(ControlError::Dimension(format!("C has {} columns, A is {}x{}", c.ncols(), a.nrows(), a.nrows())));
    }
    check_finite(a, "A")?;
    check_finite(c, "C")
}

pub fn observability_matrix(a: &Matrix, c: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = c.nrows();
    let mut out = Matrix::zeros(n * m, n);
    let mut block = c.clone();
    for k in 0..n {
        out.view_mut((k * m, 0), (m, n)).copy_from(&block);
        if k + 1 < n {
            block = &block * a;
        }
    }
    out
}

fn observable_by_rank(a: &Matrix, c: &Matrix, cfg: &ToleranceConfig) -> (Matrix, usize) {
    let o = observability_matrix(a, c);
    let rank = numerical_rank(&o, cfg);
    (o, rank)
}

/// Rank verdict together with the observability Gramian on `[0, horizon]`.
pub fn observability_test(a: &Matrix, c: &Matrix, horizon: f64, cfg: &ToleranceConfig) -> Result<ObservabilityReport> {
    check_pair(a, c)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ControlError::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let n = a.nrows();
    let (o, rank) = observable_by_rank(a, c, cfg);
    // R_T is the controllability Gramian of the dual pair (Aᵀ, Cᵀ).
    let dual = LtiSystem::new(a.transpose(), c.transpose(), None)?;
    let gramian = controllability_gramian(&dual, 0.0, horizon, cfg)?;
    let observable = rank == n;
    if observable != gramian.invertible {
        return Err(ControlError::InconsistentVerdicts(format!(
            "rank {rank} of {n} but Gramian minimum eigenvalue {:e} at T = {horizon}",
            gramian.min_eigenvalue
        )));
    }
    Ok(ObservabilityReport { observability_matrix: o, rank, observable, gramian })
}

/// Whether the rank verdict for `(A, C)` agrees with the controllability verdict for `(Aᵀ, Cᵀ)`.
pub fn duality_check(a: &Matrix, c: &Matrix, cfg: &ToleranceConfig) -> Result<bool> {
    check_pair(a, c)?;
    let (_, rank) = observable_by_rank(a, c, cfg);
    let dual = LtiSystem::new(a.transpose(), c.transpose(), None)?;
    Ok((rank == a.nrows()) == kalman_test(&dual, cfg).controllable)
}

// Moves every eigenvalue strictly into the left half-plane, keeping imaginary parts.
fn shifted_targets(spectrum: &[Complex64]) -> Result<MonicPolynomial> {
    let roots: Vec<Complex64> = spectrum.iter().map(|l| Complex64::new(-l.re.abs() - 1.0, l.im)).collect();
    MonicPolynomial::from_roots(&roots)
}

pub fn detectability_test(a: &Matrix, c: &Matrix, cfg: &ToleranceConfig) -> Result<DetectabilityReport> {
    check_pair(a, c)?;
    let n = a.nrows();
    let m = c.nrows();
    let (_, rank) = observable_by_rank(a, c, cfg);
    let observable = rank == n;
    let spectrum = eigenvalues(a)?;
    let at = a.transpose();
    let ct = c.transpose();
    let detectable = spectrum
        .iter()
        .filter(|l| l.re >= -STABILITY_MARGIN)
        .all(|&l| pbh_rank(&at, &ct, l, cfg) == n);
    if !detectable {
        return Ok(DetectabilityReport { detectable, observable, witness_l: None });
    }

    let l = if spectrum.max_real() < -STABILITY_MARGIN {
        Matrix::zeros(n, m)
    } else if observable {
        place_best(&at, &ct, &shifted_targets(&spectrum.0)?, cfg)?.f.transpose()
    } else {
        let dual = LtiSystem::new(at.clone(), ct.clone(), None)?;
        let dec = kalman_decomposition(&dual, cfg);
        let r = dec.r;
        let mut f = Matrix::zeros(m, n);
        if r > 0 {
            let target = shifted_targets(&eigenvalues(&dec.a1)?.0)?;
            let f1 = place_best(&dec.a1, &dec.b1, &target, cfg)?.f;
            // unobservable (necessarily stable) directions get zero gain
            f.view_mut((0, 0), (m, r)).copy_from(&f1);
        }
        (f * dec.t.transpose()).transpose()
    };
    let omega = spectral_abscissa(&(a + &l * c))?;
    if omega >= -STABILITY_MARGIN {
        return Err(ControlError::InconsistentVerdicts(format!(
            "detectable pair but witness gives abscissa {omega:e}"
        )));
    }
    Ok(DetectabilityReport { detectable, observable, witness_l: Some(l) })
}
