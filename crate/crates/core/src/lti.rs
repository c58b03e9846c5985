//! System models, control signals and trajectory simulation.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::numkernel::{check_finite, check_square, resolvent, rk4_step, step_count, Matrix, ToleranceConfig, Vector};
use crate::{ControlError, Result};

/// Constant-coefficient system `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl LtiSystem {
    /// Builds the triple, defaulting `C` to the identity.
    pub fn new(a: Matrix, b: Matrix, c: Option<Matrix>) -> Result<Self> {
        check_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(ControlError::Dimension(format!("B has {} rows, A is {n}x{n}", b.nrows())));
        }
        let c = c.unwrap_or_else(|| Matrix::identity(n, n));
        if c.ncols() != n {
            return Err(ControlError::Dimension(format!("C has {} columns, A is {n}x{n}", c.ncols())));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn with_c(&self, c: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), Some(c))
    }
}

type MatrixSampler = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

/// Time-varying pair `x' = A(t) x + B(t) u` on a bounded interval.
#[derive(Clone)]
pub struct LtvSystem {
    t0: f64,
    t1: f64,
    n: usize,
    p: usize,
    a_of: MatrixSampler,
    b_of: MatrixSampler,
}

impl fmt::Debug for LtvSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtvSystem")
            .field("interval", &(self.t0, self.t1))
            .field("n", &self.n)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

impl LtvSystem {
    /// Samples both callables at the endpoints and midpoint to fix and check dimensions.
    pub fn new<FA, FB>(t0: f64, t1: f64, a_of: FA, b_of: FB) -> Result<Self>
    where
        FA: Fn(f64) -> Matrix + Send + Sync + 'static,
        FB: Fn(f64) -> Matrix + Send + Sync + 'static,
    {
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(ControlError::InvalidInput(format!("interval [{t0}, {t1}] must satisfy t0 < t1")));
        }
        let a0 = a_of(t0);
        let b0 = b_of(t0);
        check_square(&a0, "A(t)")?;
        let n = a0.nrows();
        let p = b0.ncols();
        for t in [t0, 0.5 * (t0 + t1), t1] {
            let (at, bt) = (a_of(t), b_of(t));
            if at.shape() != (n, n) || bt.shape() != (n, p) {
                return Err(ControlError::Dimension(format!(
                    "samplers changed shape at t = {t}: A {:?}, B {:?}",
                    at.shape(),
                    bt.shape()
                )));
            }
            check_finite(&at, "A(t)")?;
            check_finite(&bt, "B(t)")?;
        }
        Ok(Self { t0, t1, n, p, a_of: Arc::new(a_of), b_of: Arc::new(b_of) })
    }

    /// A constant system viewed as time-varying on `[t0, t1]`.
    pub fn from_lti(sys: &LtiSystem, t0: f64, t1: f64) -> Result<Self> {
        let a = sys.a().clone();
        let b = sys.b().clone();
        Self::new(t0, t1, move |_| a.clone(), move |_| b.clone())
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.t0.abs().max(self.t1.abs()));
        if t.is_finite() && t >= self.t0 - slack && t <= self.t1 + slack {
            Ok(())
        } else {
            Err(ControlError::Domain { t, t0: self.t0, t1: self.t1 })
        }
    }

    /// State-transition matrix `R(t, s)`.
    pub fn resolvent(&self, s: f64, t: f64, cfg: &ToleranceConfig) -> Result<Matrix> {
        self.check_time(s)?;
        self.check_time(t)?;
        Ok(resolvent(|tau| (self.a_of)(tau), self.n, s, t, cfg.ode_step))
    }
}

/// Common view of constant and time-varying linear dynamics.
pub trait LinearDynamics: Send + Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn a_at(&self, t: f64) -> Matrix;
    fn b_at(&self, t: f64) -> Matrix;
    /// `None` means the dynamics are defined for all times.
    fn interval(&self) -> Option<(f64, f64)>;
    fn as_lti(&self) -> Option<&LtiSystem> {
        None
    }
}

impl LinearDynamics for LtiSystem {
    fn n(&self) -> usize {
        self.a.nrows()
    }
    fn p(&self) -> usize {
        self.b.ncols()
    }
    fn a_at(&self, _t: f64) -> Matrix {
        self.a.clone()
    }
    fn b_at(&self, _t: f64) -> Matrix {
        self.b.clone()
    }
    fn interval(&self) -> Option<(f64, f64)> {
        None
    }
    fn as_lti(&self) -> Option<&LtiSystem> {
        Some(self)
    }
}

impl LinearDynamics for LtvSystem {
    fn n(&self) -> usize {
        self.n
    }
    fn p(&self) -> usize {
        self.p
    }
    fn a_at(&self, t: f64) -> Matrix {
        (self.a_of)(t)
    }
    fn b_at(&self, t: f64) -> Matrix {
        (self.b_of)(t)
    }
    fn interval(&self) -> Option<(f64, f64)> {
        Some((self.t0, self.t1))
    }
}

type VectorSampler = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// Open-loop input `u : [t0, t1] → R^p`.
#[derive(Clone)]
pub struct ControlSignal {
    t0: f64,
    t1: f64,
    dim: usize,
    u_of: VectorSampler,
}

impl fmt::Debug for ControlSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSignal")
            .field("interval", &(self.t0, self.t1))
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl ControlSignal {
    pub fn from_fn<F>(t0: f64, t1: f64, dim: usize, u_of: F) -> Self
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        Self { t0, t1, dim, u_of: Arc::new(u_of) }
    }

    pub fn zero(t0: f64, t1: f64, dim: usize) -> Self {
        Self::from_fn(t0, t1, dim, move |_| Vector::zeros(dim))
    }

    pub fn constant(t0: f64, t1: f64, value: Vector) -> Self {
        let dim = value.len();
        Self::from_fn(t0, t1, dim, move |_| value.clone())
    }

    /// Piecewise-linear interpolation of samples; held constant outside the sample range.
    pub fn sampled(times: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(ControlError::InvalidInput("sampled control needs matching, non-empty samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ControlError::InvalidInput("sample times must be strictly increasing".into()));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(ControlError::Dimension("sampled control values differ in length".into()));
        }
        let (t0, t1) = (times[0], *times.last().unwrap());
        Ok(Self::from_fn(t0, t1, dim, move |t| {
            let k = times.partition_point(|&s| s <= t);
            if k == 0 {
                values[0].clone()
            } else if k == times.len() {
                values[k - 1].clone()
            } else {
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                &values[k - 1] * (1.0 - w) + &values[k] * w
            }
        }))
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> Vector {
        (self.u_of)(t)
    }

    /// Pointwise sum; the interval is the intersection of both.
    pub fn plus(&self, other: &ControlSignal) -> Result<ControlSignal> {
        if self.dim != other.dim {
            return Err(ControlError::Dimension(format!("control dims {} and {}", self.dim, other.dim)));
        }
        let (f, g) = (self.u_of.clone(), other.u_of.clone());
        Ok(Self::from_fn(self.t0.max(other.t0), self.t1.min(other.t1), self.dim, move |t| f(t) + g(t)))
    }

    pub fn scaled(&self, factor: f64) -> ControlSignal {
        let f = self.u_of.clone();
        Self::from_fn(self.t0, self.t1, self.dim, move |t| f(t) * factor)
    }
}

/// Sampled solution: strictly increasing grid, one state per node, optional controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Option<Vec<Vector>>,
}

impl Trajectory {
    pub fn new(grid: Vec<f64>, states: Vec<Vector>, controls: Option<Vec<Vector>>) -> Result<Self> {
        if grid.len() != states.len() {
            return Err(ControlError::Dimension("grid and states lengths differ".into()));
        }
        if let Some(c) = &controls {
            if c.len() != grid.len() {
                return Err(ControlError::Dimension("grid and controls lengths differ".into()));
            }
        }
        check_grid(&grid)?;
        Ok(Self { grid, states, controls })
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// CSV with header `t,x1,...,xn[,u1,...,up]`, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let p = self.controls.as_ref().and_then(|c| c.first()).map_or(0, |u| u.len());
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        if self.controls.is_some() {
            for j in 1..=p {
                let _ = write!(out, ",u{j}");
            }
        }
        out.push('\n');
        for (k, t) in self.grid.iter().enumerate() {
            out.push_str(&fmt_f64(*t));
            for v in self.states[k].iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            if let Some(c) = &self.controls {
                for v in c[k].iter() {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn uniform_grid(t0: f64, t1: f64, intervals: usize) -> Vec<f64> {
    let intervals = intervals.max(1);
    let h = (t1 - t0) / intervals as f64;
    (0..=intervals).map(|k| if k == intervals { t1 } else { t0 + k as f64 * h }).collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(ControlError::InvalidInput("empty time grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(ControlError::NonFinite("time grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ControlError::InvalidInput("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_inside(grid: &[f64], t0: f64, t1: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + t0.abs().max(t1.abs()));
    for &t in [grid[0], *grid.last().unwrap()].iter() {
        if t < t0 - slack || t > t1 + slack {
            return Err(ControlError::Domain { t, t0, t1 });
        }
    }
    Ok(())
}

/// RK4 simulation of `x' = A(t) x + B(t) u(t)` reported on `grid`; between
/// consecutive grid points the step never exceeds `cfg.ode_step`.
pub fn simulate<D: LinearDynamics + ?Sized>(
    sys: &D,
    x0: &Vector,
    u: &ControlSignal,
    grid: &[f64],
    cfg: &ToleranceConfig,
) -> Result<Trajectory> {
    check_grid(grid)?;
    let n = sys.n();
    if x0.len() != n {
        return Err(ControlError::Dimension(format!("x0 has length {}, state dimension is {n}", x0.len())));
    }
    if u.dim() != sys.p() {
        return Err(ControlError::Dimension(format!("control has dimension {}, system input is {}", u.dim(), sys.p())));
    }
    if let Some((t0, t1)) = sys.interval() {
        check_inside(grid, t0, t1)?;
    }
    let (c0, c1) = u.interval();
    check_inside(grid, c0, c1)?;

    let lti = sys.as_lti();
    let rhs = |t: f64, x: &Vector| match lti {
        Some(l) => l.a() * x + l.b() * u.eval(t),
        None => sys.a_at(t) * x + sys.b_at(t) * u.eval(t),
    };
    let mut states = Vec::with_capacity(grid.len());
    let mut controls = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    states.push(x.clone());
    controls.push(u.eval(grid[0]));
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let steps = step_count(span, cfg.ode_step);
        let h = span / steps as f64;
        for k in 0..steps {
            x = rk4_step(&rhs, w[0] + k as f64 * h, &x, h);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::Numerical(format!("state diverged before t = {}", w[1])));
        }
        states.push(x.clone());
        controls.push(u.eval(w[1]));
    }
    Trajectory::new(grid.to_vec(), states, Some(controls))
}
