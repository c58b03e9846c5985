//! Dense kernels shared by every analysis: matrix exponential, spectra,
//! numerical rank, Sylvester solves, quadrature and fixed-step integration.

mod eigen;
mod expm;
mod linalg;
mod ode;
mod quadrature;

use serde::{Deserialize, Serialize};

pub use eigen::{eigenvalues, sort_spectrum, ComplexScalarList};
pub use expm::expm;
pub use linalg::{
    check_finite, check_square, frobenius, induced_two_norm, numerical_rank, orthonormal_split,
    solve_sylvester, symmetric_eigen_min, symmetrize,
};
pub use ode::{resolvent, rk4_step, step_count, ResolventTable};
pub use quadrature::{simpson_nonuniform, simpson_uniform};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Tolerances and step sizes threaded through every numerical routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Relative singular-value cutoff factor for rank decisions.
    pub rank_rtol: f64,
    /// Residual threshold for linear and matrix equations.
    pub residual_tol: f64,
    /// Default time step of the integrators and quadrature nodes.
    pub ode_step: f64,
    /// Terminal error at which the nonlinear steering iteration stops.
    pub fixed_point_tol: f64,
    pub max_iter: usize,
    /// Radius of the neighbourhood in which nonlinear steering is attempted.
    pub trust_radius: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-10,
            residual_tol: 1e-8,
            ode_step: 1e-3,
            fixed_point_tol: 1e-10,
            max_iter: 50,
            trust_radius: 0.1,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("rank_rtol", self.rank_rtol),
            ("residual_tol", self.residual_tol),
            ("ode_step", self.ode_step),
            ("fixed_point_tol", self.fixed_point_tol),
            ("trust_radius", self.trust_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::ControlError::InvalidInput(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(crate::ControlError::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}
