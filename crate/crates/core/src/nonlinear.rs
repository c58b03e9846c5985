//! Local steering of `x' = f(x, u)` near a reference trajectory through the
//! controllability of its linearization.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lti::{check_grid, simulate, uniform_grid, ControlSignal, LinearDynamics, LtvSystem, Trajectory};
use crate::numkernel::{rk4_step, step_count, Matrix, ToleranceConfig, Vector};
use crate::reachability::{gramian_report, steering_intervals, GramianReport, Transition};
use crate::{ControlError, Result};

type FieldFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
type PartialFn = Arc<dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync>;
type PathFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

const FD_STEP: f64 = 1e-6;
const REFERENCE_RESIDUAL_TOL: f64 = 1e-6;
const EQUILIBRIUM_TOL: f64 = 1e-8;
const REFERENCE_CHECK_INTERVALS: usize = 200;

/// Right-hand side `f : R^n × R^p → R^n` with optional analytic partials;
/// missing partials fall back to central differences.
#[derive(Clone)]
pub struct VectorField {
    n: usize,
    p: usize,
    f: FieldFn,
    fx: Option<PartialFn>,
    fu: Option<PartialFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("analytic_fx", &self.fx.is_some())
            .field("analytic_fu", &self.fu.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(n: usize, p: usize, f: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self { n, p, f: Arc::new(f), fx: None, fu: None }
    }

    pub fn with_partials<FX, FU>(mut self, fx: FX, fu: FU) -> Self
    where
        FX: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
        FU: Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        self.fx = Some(Arc::new(fx));
        self.fu = Some(Arc::new(fu));
        self
    }

    /// Normalized pendulum `θ'' = -sin θ + u` in the state `(θ, θ')`.
    pub fn pendulum() -> Self {
        Self::new(2, 1, |x, u| Vector::from_vec(vec![x[1], -x[0].sin() + u[0]])).with_partials(
            |x, _| Matrix::from_row_slice(2, 2, &[0.0, 1.0, -x[0].cos(), 0.0]),
            |_, _| Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
    }

    pub fn double_integrator() -> Self {
        Self::linear(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), Matrix::from_row_slice(2, 1, &[0.0, 1.0]))
    }

    /// `f(x, u) = A x + B u` with exact partials.
    pub fn linear(a: Matrix, b: Matrix) -> Self {
        let (a1, b1, a2, b2) = (a.clone(), b.clone(), a, b);
        Self::new(a1.nrows(), b1.ncols(), move |x, u| &a1 * x + &b1 * u)
            .with_partials(move |_, _| a2.clone(), move |_, _| b2.clone())
    }

    /// Polynomial field given componentwise as sums of monomials.
    pub fn polynomial(spec: &PolynomialField) -> Result<Self> {
        spec.validate()?;
        let (s0, s1, s2) = (spec.clone(), spec.clone(), spec.clone());
        Ok(Self::new(spec.state_dim, spec.control_dim, move |x, u| s0.eval(x, u))
            .with_partials(move |x, u| s1.jacobian(x, u, false), move |x, u| s2.jacobian(x, u, true)))
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.p
    }

    fn check_args(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.n || u.len() != self.p {
            return Err(ControlError::Dimension(format!(
                "field expects x in R^{} and u in R^{}, got {} and {}",
                self.n,
                self.p,
                x.len(),
                u.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check_args(x, u)?;
        let v = (self.f)(x, u);
        if v.len() != self.n || v.iter().any(|c| !c.is_finite()) {
            return Err(ControlError::Evaluation(format!("f is not a finite {}-vector at x = {x:?}", self.n)));
        }
        Ok(v)
    }

    /// `(f_x, f_u)` at `(x, u)`.
    pub fn partials(&self, x: &Vector, u: &Vector) -> Result<(Matrix, Matrix)> {
        self.check_args(x, u)?;
        let fx = match &self.fx {
            Some(g) => g(x, u),
            None => self.central_difference(x, u, false)?,
        };
        let fu = match &self.fu {
            Some(g) => g(x, u),
            None => self.central_difference(x, u, true)?,
        };
        if fx.shape() != (self.n, self.n) || fu.shape() != (self.n, self.p) {
            return Err(ControlError::Evaluation("partials have the wrong shape".into()));
        }
        if fx.iter().chain(fu.iter()).any(|v| !v.is_finite()) {
            return Err(ControlError::Evaluation(format!("non-finite partials at x = {x:?}")));
        }
        Ok((fx, fu))
    }

    fn central_difference(&self, x: &Vector, u: &Vector, wrt_u: bool) -> Result<Matrix> {
        let cols = if wrt_u { self.p } else { self.n };
        let mut out = Matrix::zeros(self.n, cols);
        for j in 0..cols {
            let base = if wrt_u { u[j] } else { x[j] };
            let h = FD_STEP * base.abs().max(1.0);
            let (mut xp, mut up, mut xm, mut um) = (x.clone(), u.clone(), x.clone(), u.clone());
            if wrt_u {
                up[j] += h;
                um[j] -= h;
            } else {
                xp[j] += h;
                xm[j] -= h;
            }
            let d = (self.eval(&xp, &up)? - self.eval(&xm, &um)?) / (2.0 * h);
            out.set_column(j, &d);
        }
        Ok(out)
    }
}

/// `c · ∏ x_i^{a_i} · ∏ u_j^{b_j}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub x: Vec<u32>,
    #[serde(default)]
    pub u: Vec<u32>,
}

/// Polynomial right-hand side: `components[i]` lists the monomials of `f_i`.
/// Exponent lists may be shorter than the dimension; missing entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialField {
    pub state_dim: usize,
    pub control_dim: usize,
    pub components: Vec<Vec<Monomial>>,
}

impl PolynomialField {
    fn validate(&self) -> Result<()> {
        if self.components.len() != self.state_dim {
            return Err(ControlError::InvalidInput(format!(
                "polynomial field has {} components for state dimension {}",
                self.components.len(),
                self.state_dim
            )));
        }
        for m in self.components.iter().flatten() {
            if m.x.len() > self.state_dim || m.u.len() > self.control_dim {
                return Err(ControlError::InvalidInput("monomial exponent list longer than the dimension".into()));
            }
            if !m.coeff.is_finite() {
                return Err(ControlError::NonFinite("monomial coefficient".into()));
            }
        }
        Ok(())
    }

    fn monomial(m: &Monomial, x: &Vector, u: &Vector, skip: Option<(bool, usize)>) -> f64 {
        let mut v = m.coeff;
        for (i, &e) in m.x.iter().enumerate() {
            let e = if skip == Some((false, i)) { e - 1 } else { e };
            v *= x[i].powi(e as i32);
        }
        for (j, &e) in m.u.iter().enumerate() {
            let e = if skip == Some((true, j)) { e - 1 } else { e };
            v *= u[j].powi(e as i32);
        }
        v
    }

    fn eval(&self, x: &Vector, u: &Vector) -> Vector {
        Vector::from_iterator(
            self.state_dim,
            self.components.iter().map(|terms| terms.iter().map(|m| Self::monomial(m, x, u, None)).sum::<f64>()),
        )
    }

    fn jacobian(&self, x: &Vector, u: &Vector, wrt_u: bool) -> Matrix {
        let cols = if wrt_u { self.control_dim } else { self.state_dim };
        Matrix::from_fn(self.state_dim, cols, |i, j| {
            self.components[i]
                .iter()
                .map(|m| {
                    let e = if wrt_u { m.u.get(j) } else { m.x.get(j) }.copied().unwrap_or(0);
                    if e == 0 {
                        0.0
                    } else {
                        e as f64 * Self::monomial(m, x, u, Some((wrt_u, j)))
                    }
                })
                .sum()
        })
    }
}

/// Solution `(x̄, ū)` of the field on `[t0, t1]`.
#[derive(Clone)]
pub struct ReferenceTrajectory {
    t0: f64,
    t1: f64,
    xbar: PathFn,
    ubar: PathFn,
}

impl fmt::Debug for ReferenceTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceTrajectory").field("interval", &(self.t0, self.t1)).finish_non_exhaustive()
    }
}

impl ReferenceTrajectory {
    /// Checks `x̄' = f(x̄, ū)` by finite differences on a uniform verification grid.
    pub fn new<X, U>(vf: &VectorField, t0: f64, t1: f64, xbar: X, ubar: U) -> Result<Self>
    where
        X: Fn(f64) -> Vector + Send + Sync + 'static,
        U: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(ControlError::InvalidInput(format!("interval [{t0}, {t1}] must satisfy t0 < t1")));
        }
        let grid = uniform_grid(t0, t1, REFERENCE_CHECK_INTERVALS);
        let dt = 1e-4 * (t1 - t0);
        let mut worst: f64 = 0.0;
        for &t in &grid {
            let rhs = vf.eval(&xbar(t), &ubar(t))?;
            // second-order differences that stay inside [t0, t1]
            let deriv = if t - dt < t0 {
                (xbar(t) * -3.0 + xbar(t + dt) * 4.0 - xbar(t + 2.0 * dt)) / (2.0 * dt)
            } else if t + dt > t1 {
                (xbar(t) * 3.0 - xbar(t - dt) * 4.0 + xbar(t - 2.0 * dt)) / (2.0 * dt)
            } else {
                (xbar(t + dt) - xbar(t - dt)) / (2.0 * dt)
            };
            worst = worst.max((deriv - &rhs).norm() / (1.0 + rhs.norm()));
        }
        if !(worst <= REFERENCE_RESIDUAL_TOL) {
            return Err(ControlError::InvalidInput(format!(
                "reference is not a solution of the field (residual {worst:e})"
            )));
        }
        Ok(Self { t0, t1, xbar: Arc::new(xbar), ubar: Arc::new(ubar) })
    }

    /// Constant reference at an equilibrium `f(x_e, u_e) = 0`.
    pub fn equilibrium(vf: &VectorField, xe: Vector, ue: Vector, t0: f64, t1: f64) -> Result<Self> {
        let v = vf.eval(&xe, &ue)?;
        if v.norm() > EQUILIBRIUM_TOL * (1.0 + xe.norm()) {
            return Err(ControlError::InvalidInput(format!("f(x_e, u_e) has norm {:e}, not an equilibrium", v.norm())));
        }
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(ControlError::InvalidInput(format!("interval [{t0}, {t1}] must satisfy t0 < t1")));
        }
        Ok(Self { t0, t1, xbar: Arc::new(move |_| xe.clone()), ubar: Arc::new(move |_| ue.clone()) })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn xbar(&self, t: f64) -> Vector {
        (self.xbar)(t)
    }

    pub fn ubar(&self, t: f64) -> Vector {
        (self.ubar)(t)
    }
}

/// `A(t) = f_x(x̄(t), ū(t))`, `B(t) = f_u(x̄(t), ū(t))`.
pub fn linearize_along(vf: &VectorField, reference: &ReferenceTrajectory) -> Result<LtvSystem> {
    let (t0, t1) = reference.interval();
    for t in uniform_grid(t0, t1, 16) {
        vf.partials(&reference.xbar(t), &reference.ubar(t))?;
    }
    let (va, ra) = (vf.clone(), reference.clone());
    let (vb, rb) = (vf.clone(), reference.clone());
    let nan_a = Matrix::from_element(vf.n, vf.n, f64::NAN);
    let nan_b = Matrix::from_element(vf.n, vf.p, f64::NAN);
    LtvSystem::new(
        t0,
        t1,
        move |t| va.partials(&ra.xbar(t), &ra.ubar(t)).map(|(a, _)| a).unwrap_or_else(|_| nan_a.clone()),
        move |t| vb.partials(&rb.xbar(t), &rb.ubar(t)).map(|(_, b)| b).unwrap_or_else(|_| nan_b.clone()),
    )
}

/// RK4 integration of the nonlinear field, with substeps of at most `cfg.ode_step`.
pub fn simulate_field(vf: &VectorField, x0: &Vector, u: &ControlSignal, grid: &[f64], cfg: &ToleranceConfig) -> Result<Trajectory> {
    check_grid(grid)?;
    if x0.len() != vf.n || u.dim() != vf.p {
        return Err(ControlError::Dimension("initial state or control does not match the field".into()));
    }
    let rhs = |t: f64, x: &Vector| (vf.f)(x, &u.eval(t));
    let mut x = x0.clone();
    let mut states = vec![x.clone()];
    let mut controls = vec![u.eval(grid[0])];
    for w in grid.windows(2) {
        let steps = step_count(w[1] - w[0], cfg.ode_step);
        let h = (w[1] - w[0]) / steps as f64;
        for k in 0..steps {
            x = rk4_step(&rhs, w[0] + k as f64 * h, &x, h);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::Evaluation(format!("state became non-finite before t = {}", w[1])));
        }
        states.push(x.clone());
        controls.push(u.eval(w[1]));
    }
    Trajectory::new(grid.to_vec(), states, Some(controls))
}

#[derive(Debug, Clone)]
pub struct SteeringResult {
    pub trajectory: Trajectory,
    pub control: ControlSignal,
    /// Number of nonlinear simulations performed.
    pub iterations: usize,
    /// `‖x(t1) - x1‖` of the returned trajectory.
    pub terminal_error: f64,
    pub converged: bool,
    /// Terminal errors of all iterates.
    pub error_history: Vec<f64>,
    /// Gramian of the linearization on `[t0, t1]`.
    pub gramian: GramianReport,
}

/// Steers `x0` at `t0` to `x1` at `t1` near the reference, iterating
/// `φ ↦ φ - H(φ) + x1`, where `H(φ)` is the nonlinear end state under the
/// control that would steer the linearization to `φ`.
pub fn steer_nonlinear(
    vf: &VectorField,
    reference: &ReferenceTrajectory,
    x0: &Vector,
    x1: &Vector,
    cfg: &ToleranceConfig,
) -> Result<SteeringResult> {
    cfg.validate()?;
    let (t0, t1) = reference.interval();
    if x0.len() != vf.n || x1.len() != vf.n {
        return Err(ControlError::Dimension(format!("endpoints must lie in R^{}", vf.n)));
    }
    let xbar0 = reference.xbar(t0);
    let xbar1 = reference.xbar(t1);
    let delta = cfg.trust_radius;
    let (d0, d1) = ((x0 - &xbar0).norm(), (x1 - &xbar1).norm());
    if d0 > delta || d1 > delta {
        return Err(ControlError::Precondition(format!(
            "endpoints are {d0:e} and {d1:e} away from the reference, trust radius is {delta:e}"
        )));
    }

    let lin: Arc<dyn LinearDynamics> = Arc::new(linearize_along(vf, reference)?);
    let intervals = steering_intervals(t0, t1, cfg);
    let tr = Transition::build(lin.clone(), t0, t1, 2 * intervals)?;
    let gramian = gramian_report(lin.as_ref(), &tr, (t0, t1));
    if !gramian.invertible {
        return Err(ControlError::LinearTestInapplicable { min_eigenvalue: gramian.min_eigenvalue });
    }
    let grid = uniform_grid(t0, t1, intervals);
    let tr = Arc::new(tr);
    let inner = |z: Vector| {
        let (sys, tr) = (lin.clone(), tr.clone());
        ControlSignal::from_fn(t0, t1, vf.p, move |s| sys.b_at(s).transpose() * (tr.at(s).transpose() * &z))
    };

    // The inner map z ↦ δx(t1), realized with the same integrator that
    // produces the endpoints, so its discretization error cancels.
    let n = vf.n;
    let mut realized = Matrix::zeros(n, n);
    for i in 0..n {
        let end = simulate(lin.as_ref(), &Vector::zeros(n), &inner(Matrix::identity(n, n).column(i).into_owned()), &grid, cfg)?;
        realized.set_column(i, end.final_state());
    }
    let free = simulate(lin.as_ref(), &(x0 - &xbar0), &ControlSignal::zero(t0, t1, vf.p), &grid, cfg)?;
    let free_gap = free.final_state().clone();
    let lu = realized.lu();
    if !lu.is_invertible() {
        return Err(ControlError::Conditioning("realized Gramian is singular".into()));
    }

    let run = |phi: &Vector| -> Result<(ControlSignal, Trajectory)> {
        let z = lu
            .solve(&(phi - &xbar1 - &free_gap))
            .ok_or_else(|| ControlError::Conditioning("realized Gramian solve failed".into()))?;
        let (delta_u, reference) = (inner(z), reference.clone());
        let control = ControlSignal::from_fn(t0, t1, vf.p, move |s| reference.ubar(s) + delta_u.eval(s));
        let traj = simulate_field(vf, x0, &control, &grid, cfg)?;
        Ok((control, traj))
    };

    let mut phi = x1.clone();
    let mut history = Vec::new();
    loop {
        let (control, trajectory) = run(&phi)?;
        let end = trajectory.final_state().clone();
        let terminal_error = (&end - x1).norm();
        history.push(terminal_error);
        let converged = terminal_error <= cfg.fixed_point_tol;
        if converged || history.len() >= cfg.max_iter {
            return Ok(SteeringResult {
                trajectory,
                control,
                iterations: history.len(),
                terminal_error,
                converged,
                error_history: history,
                gramian,
            });
        }
        phi = &phi - &end + x1;
        if (&phi - x1).norm() > 10.0 * delta {
            return Err(ControlError::Divergence { history });
        }
    }
}
