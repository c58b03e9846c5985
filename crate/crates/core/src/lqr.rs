//! Linear-quadratic regulation with cost `∫_0^T (‖Cx‖² + ‖u‖²) dt + ⟨P0 x(T), x(T)⟩`:
//! the Riccati differential equation, the optimal feedback trajectory, and the
//! algebraic Riccati solution as the infinite-horizon limit.

use crate::lti::{LtiSystem, Trajectory};
use crate::numkernel::{step_count, 
    eigenvalues, induced_two_norm, rk4_step, simpson_nonuniform, symmetric_eigen_min, symmetrize,
    Matrix, ToleranceConfig, Vector,
};
use crate::reachability::pbh_rank;
use crate::stability::{spectral_abscissa, STABILITY_MARGIN};
use crate::{ControlError, Result};

const ESCAPE_NORM: f64 = 1e12;
const PSD_SLACK: f64 = 1e-9;
const HORIZON_DOUBLINGS: u32 = 20;

#[derive(Debug, Clone)]
pub struct LqrProblem {
    pub sys: LtiSystem,
    /// Terminal weight, symmetric nonnegative.
    pub p0: Matrix,
    /// `f64::INFINITY` for the infinite-horizon problem.
    pub horizon: f64,
}

impl LqrProblem {
    pub fn new(sys: LtiSystem, p0: Matrix, horizon: f64) -> Result<Self> {
        let n = sys.n();
        if p0.shape() != (n, n) {
            return Err(ControlError::Dimension(format!("P0 is {:?}, state dimension is {n}", p0.shape())));
        }
        if p0.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::NonFinite("P0".into()));
        }
        let asym = (&p0 - p0.transpose()).norm();
        if asym > 1e-10 * (1.0 + p0.norm()) {
            return Err(ControlError::InvalidInput(format!("P0 is not symmetric (asymmetry {asym:e})")));
        }
        let min_eig = symmetric_eigen_min(&p0);
        if min_eig < -1e-10 * (1.0 + p0.norm()) {
            return Err(ControlError::InvalidInput(format!("P0 is not nonnegative (min eigenvalue {min_eig:e})")));
        }
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(ControlError::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { sys, p0: symmetrize(&p0), horizon })
    }

    fn quadratics(&self) -> (Matrix, Matrix) {
        let b = self.sys.b();
        let c = self.sys.c();
        (b * b.transpose(), c.transpose() * c)
    }
}

// Right-hand side of the time-to-go flow: dP/dτ = PA + AᵀP - PBBᵀP + CᵀC.
#[derive(Clone)]
struct RiccatiField {
    a: Matrix,
    bbt: Matrix,
    ctc: Matrix,
}

impl RiccatiField {
    fn from_problem(prob: &LqrProblem) -> Self {
        let (bbt, ctc) = prob.quadratics();
        Self { a: prob.sys.a().clone(), bbt, ctc }
    }

    fn eval(&self, p: &Matrix) -> Matrix {
        let pa = p * &self.a;
        &pa + pa.transpose() - p * &self.bbt * p + &self.ctc
    }

    fn step(&self, p: &Matrix, h: f64) -> Matrix {
        symmetrize(&rk4_step(&|_, x: &Matrix| self.eval(x), 0.0, p, h))
    }
}

/// `P_T(t)` sampled on a uniform grid of `[0, T]`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub grid: Vec<f64>,
    pub samples: Vec<Matrix>,
    pub terminal_matches_p0: bool,
    /// Largest Frobenius residual of the differential equation, measured by
    /// fourth-order finite differences at interior samples.
    pub max_residual: f64,
    a: Matrix,
    bbt: Matrix,
    ctc: Matrix,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn initial(&self) -> &Matrix {
        &self.samples[0]
    }

    fn field(&self) -> RiccatiField {
        RiccatiField { a: self.a.clone(), bbt: self.bbt.clone(), ctc: self.ctc.clone() }
    }

    /// `P_T(t)`; between samples a cubic Hermite interpolant using the exact slopes.
    pub fn at(&self, t: f64) -> Result<Matrix> {
        let t_end = self.horizon();
        let slack = 1e-12 * (1.0 + t_end);
        if !(t >= -slack && t <= t_end + slack) {
            return Err(ControlError::Domain { t, t0: 0.0, t1: t_end });
        }
        let n = self.grid.len() - 1;
        let h = t_end / n as f64;
        let k = ((t / h).floor().max(0.0) as usize).min(n - 1);
        let s = ((t - self.grid[k]) / h).clamp(0.0, 1.0);
        if s == 0.0 {
            return Ok(self.samples[k].clone());
        }
        if s == 1.0 {
            return Ok(self.samples[k + 1].clone());
        }
        let field = self.field();
        // dP/dt = -(time-to-go slope)
        let d0 = -field.eval(&self.samples[k]);
        let d1 = -field.eval(&self.samples[k + 1]);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(&self.samples[k] * h00 + d0 * (h10 * h) + &self.samples[k + 1] * h01 + d1 * (h11 * h))
    }
}

/// Backward RK4 integration of `P' + PA + AᵀP - PBBᵀP + CᵀC = 0`, `P(T) = P0`,
/// with step `min(ode_step, T / 2000)`.
pub fn riccati_finite(prob: &LqrProblem, cfg: &ToleranceConfig) -> Result<RiccatiSolution> {
    let t_end = prob.horizon;
    if !t_end.is_finite() {
        return Err(ControlError::InvalidInput("riccati_finite needs a finite horizon".into()));
    }
    let h_max = cfg.ode_step.min(t_end / 2000.0);
    let intervals = step_count(t_end, h_max);
    let h = t_end / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|k| if k == intervals { t_end } else { k as f64 * h }).collect();
    let field = RiccatiField::from_problem(prob);

    let mut samples = vec![Matrix::zeros(0, 0); intervals + 1];
    samples[intervals] = prob.p0.clone();
    let mut p = prob.p0.clone();
    for k in (0..intervals).rev() {
        p = field.step(&p, h);
        let norm = p.norm();
        if !(norm <= ESCAPE_NORM) {
            return Err(ControlError::EscapeTime { t: grid[k], norm });
        }
        let min_eig = symmetric_eigen_min(&p);
        if min_eig < -PSD_SLACK * (1.0 + norm) {
            return Err(ControlError::Numerical(format!(
                "Riccati sample at t = {} lost nonnegativity (min eigenvalue {min_eig:e})",
                grid[k]
            )));
        }
        samples[k] = p.clone();
    }

    let mut max_residual: f64 = 0.0;
    for k in 2..intervals.saturating_sub(1) {
        let dp = (&samples[k - 2] - &samples[k - 1] * 8.0 + &samples[k + 1] * 8.0 - &samples[k + 2]) / (12.0 * h);
        max_residual = max_residual.max((dp + field.eval(&samples[k])).norm());
    }
    let terminal_matches_p0 = samples[intervals] == prob.p0;
    Ok(RiccatiSolution {
        grid,
        samples,
        terminal_matches_p0,
        max_residual,
        a: field.a,
        bbt: field.bbt,
        ctc: field.ctc,
    })
}

#[derive(Debug, Clone)]
pub struct LqrTrajectory {
    /// Optimal state with the feedback control `-BᵀP_T(t) x̃(t)` as controls.
    pub trajectory: Trajectory,
    /// `ỹ(t) = P_T(t) x̃(t)`
    pub adjoint: Vec<Vector>,
    pub cost: f64,
}

/// Closed-loop optimal trajectory from `x̃(0) = ξ` on the grid of `sol`.
pub fn lqr_trajectory(prob: &LqrProblem, sol: &RiccatiSolution, xi: &Vector) -> Result<LqrTrajectory> {
    let n = prob.sys.n();
    if xi.len() != n {
        return Err(ControlError::Dimension(format!("ξ has length {}, state dimension is {n}", xi.len())));
    }
    let t_end = sol.horizon();
    if sol.samples[0].nrows() != n || (t_end - prob.horizon).abs() > 1e-12 * (1.0 + t_end) {
        return Err(ControlError::Domain { t: prob.horizon, t0: 0.0, t1: t_end });
    }
    let b = prob.sys.b();
    let a = prob.sys.a();
    let field = sol.field();
    let intervals = sol.grid.len() - 1;
    let h = t_end / intervals as f64;
    let mut states = Vec::with_capacity(intervals + 1);
    let mut x = xi.clone();
    states.push(x.clone());
    for k in 0..intervals {
        let p0 = &sol.samples[k];
        let p1 = &sol.samples[k + 1];
        let pm = (p0 + p1) * 0.5 + (field.eval(p1) - field.eval(p0)) * (h / 8.0);
        let closed = |p: &Matrix| a - &field.bbt * p;
        let (m0, mm, m1) = (closed(p0), closed(&pm), closed(p1));
        let k1 = &m0 * &x;
        let k2 = &mm * (&x + &k1 * (0.5 * h));
        let k3 = &mm * (&x + &k2 * (0.5 * h));
        let k4 = &m1 * (&x + &k3 * h);
        x = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        states.push(x.clone());
    }
    let controls: Vec<Vector> = states.iter().zip(&sol.samples).map(|(x, p)| -(b.transpose() * (p * x))).collect();
    let adjoint = states.iter().zip(&sol.samples).map(|(x, p)| p * x).collect();
    let trajectory = Trajectory::new(sol.grid.clone(), states, Some(controls))?;
    let cost = evaluate_cost(prob, &trajectory)?;
    Ok(LqrTrajectory { trajectory, adjoint, cost })
}

/// Simpson quadrature of the running cost on the trajectory grid plus the terminal term.
pub fn evaluate_cost(prob: &LqrProblem, traj: &Trajectory) -> Result<f64> {
    let controls = traj.controls.as_ref().ok_or(ControlError::MissingControls)?;
    let c = prob.sys.c();
    let running: Vec<f64> = traj
        .states
        .iter()
        .zip(controls)
        .map(|(x, u)| (c * x).norm_squared() + u.norm_squared())
        .collect();
    let integral = simpson_nonuniform(&traj.grid, &running).ok_or(ControlError::InvalidInput("empty trajectory".into()))?;
    let xt = traj.final_state();
    Ok(integral + xt.dot(&(&prob.p0 * xt)))
}

#[derive(Debug, Clone)]
pub struct AreSolution {
    pub p: Matrix,
    /// `‖AᵀP + PA - PBBᵀP + CᵀC‖_F` relative to the size of its terms.
    pub residual: f64,
    /// `ω(A - BBᵀP)`
    pub closed_loop_abscissa: f64,
    /// Time-to-go at which the doubling sequence settled.
    pub horizon_used: f64,
    /// Terminal weight of the converged flow.
    pub terminal_weight: Matrix,
}

impl AreSolution {
    /// Optimal feedback `K = -BᵀP`.
    pub fn gain(&self, b: &Matrix) -> Matrix {
        -b.transpose() * &self.p
    }
}

/// Hautus test restricted to the closed right half-plane.
pub fn check_finite_cost(sys: &LtiSystem, cfg: &ToleranceConfig) -> Result<()> {
    let n = sys.n();
    for &l in eigenvalues(sys.a())?.iter().filter(|l| l.re >= -STABILITY_MARGIN) {
        if pbh_rank(sys.a(), sys.b(), l, cfg) < n {
            return Err(ControlError::FiniteCostViolation { re: l.re, im: l.im });
        }
    }
    Ok(())
}

// Runs the time-to-go flow from `start`, doubling the horizon until P(τ) settles.
fn doubling_limit(field: &RiccatiField, start: &Matrix, cfg: &ToleranceConfig) -> Result<(Matrix, f64)> {
    let t_init = 1.0;
    let h0 = cfg.ode_step.min(t_init / 2000.0);
    let mut p = start.clone();
    let mut tau = 0.0;
    let advance = |p: &mut Matrix, from: f64, to: f64| -> Result<()> {
        // Steps may grow with the horizon while staying well inside the RK4
        // stability region of the linearized flow.
        let closed = &field.a - &field.bbt * &*p;
        let h_cap = (0.25 / (1.0 + induced_two_norm(&closed))).max(h0);
        let h_max = if from < t_init { h0 } else { h_cap.min(from / 2000.0).max(h0) };
        let steps = step_count(to - from, h_max);
        let h = (to - from) / steps as f64;
        for k in 0..steps {
            *p = field.step(p, h);
            let norm = p.norm();
            if !(norm <= ESCAPE_NORM) {
                return Err(ControlError::EscapeTime { t: from + (k + 1) as f64 * h, norm });
            }
        }
        Ok(())
    };
    advance(&mut p, tau, t_init)?;
    tau = t_init;
    let mut change = f64::INFINITY;
    for _ in 0..HORIZON_DOUBLINGS {
        let prev = p.clone();
        advance(&mut p, tau, 2.0 * tau)?;
        tau *= 2.0;
        change = (&p - &prev).norm();
        if change <= cfg.residual_tol * (1.0 + p.norm()) {
            return Ok((p, tau));
        }
    }
    Err(ControlError::Convergence { horizon: tau, change })
}

fn are_residual(field: &RiccatiField, p: &Matrix) -> f64 {
    let pa = p * &field.a;
    let quad = p * &field.bbt * p;
    let scale = 1.0 + 2.0 * pa.norm() + quad.norm() + field.ctc.norm();
    field.eval(p).norm() / scale
}

/// Stabilizing solution of `AᵀP + PA - PBBᵀP + CᵀC = 0` as the limit of
/// `P_T(0)` for growing horizons.
///
/// The flow starts from the zero terminal weight. When that limit does not
/// stabilize the closed loop (unstable modes invisible in the cost), the flow
/// is restarted from the identity terminal weight.
pub fn are_solve(sys: &LtiSystem, cfg: &ToleranceConfig) -> Result<AreSolution> {
    check_finite_cost(sys, cfg)?;
    let n = sys.n();
    let prob = LqrProblem::new(sys.clone(), Matrix::zeros(n, n), f64::INFINITY)?;
    let field = RiccatiField::from_problem(&prob);
    let mut last = None;
    for start in [Matrix::zeros(n, n), Matrix::identity(n, n)] {
        let (p, horizon_used) = doubling_limit(&field, &start, cfg)?;
        let closed_loop_abscissa = spectral_abscissa(&(sys.a() - &field.bbt * &p))?;
        let residual = are_residual(&field, &p);
        let sol = AreSolution { p, residual, closed_loop_abscissa, horizon_used, terminal_weight: start };
        if closed_loop_abscissa < -STABILITY_MARGIN {
            if sol.residual > cfg.residual_tol {
                return Err(ControlError::Numerical(format!("Riccati residual {:e} exceeds tolerance", sol.residual)));
            }
            return Ok(sol);
        }
        last = Some(sol);
    }
    let sol = last.expect("at least one flow ran");
    Err(ControlError::Numerical(format!(
        "Riccati limit is not stabilizing (closed-loop abscissa {:e})",
        sol.closed_loop_abscissa
    )))
}
