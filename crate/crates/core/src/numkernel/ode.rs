use std::ops::{Add, Mul};

use super::Matrix;

/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
/// Number of equal steps covering `span` with steps at most `max_step`, allowing
/// a relative overshoot of `1e-12` so rounding in `span` does not add a step.
pub fn step_count(span: f64, max_step: f64) -> usize {
    ((span.abs() / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

pub fn rk4_step<S, F>(f: &F, t: f64, y: &S, h: f64) -> S
where
    S: Clone + Add<Output = S> + Mul<f64, Output = S>,
    F: Fn(f64, &S) -> S,
{
    let half = 0.5 * h;
    let k1 = f(t, y);
    let k2 = f(t + half, &(y.clone() + k1.clone() * half));
    let k3 = f(t + half, &(y.clone() + k2.clone() * half));
    let k4 = f(t + h, &(y.clone() + k3.clone() * h));
    y.clone() + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// State-transition matrix `R(t, s)` of `x' = A(t) x`, integrated with RK4 from
/// `s` to `t` in steps no longer than `max_step`. `R(s, s)` is the identity.
pub fn resolvent<F>(a_of: F, n: usize, s: f64, t: f64, max_step: f64) -> Matrix
where
    F: Fn(f64) -> Matrix,
{
    let mut r = Matrix::identity(n, n);
    let span = t - s;
    if span == 0.0 {
        return r;
    }
    let steps = step_count(span, max_step);
    let h = span / steps as f64;
    let rhs = |tau: f64, m: &Matrix| a_of(tau) * m;
    for k in 0..steps {
        r = rk4_step(&rhs, s + k as f64 * h, &r, h);
    }
    r
}

/// Samples of `s ↦ R(t1, s)` on a uniform grid of `[t0, t1]`.
///
/// Built by integrating `d/ds X(s) = -X(s) A(s)` backward from `X(t1) = I`, so
/// every node is produced by one RK4 sweep.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    pub t0: f64,
    pub t1: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<Matrix>,
}

impl ResolventTable {
    pub fn build<F>(a_of: F, n: usize, t0: f64, t1: f64, intervals: usize) -> Self
    where
        F: Fn(f64) -> Matrix,
    {
        let intervals = intervals.max(1);
        let h = (t1 - t0) / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals)
            .map(|k| if k == intervals { t1 } else { t0 + k as f64 * h })
            .collect();
        let mut values = vec![Matrix::zeros(n, n); intervals + 1];
        let mut x = Matrix::identity(n, n);
        values[intervals] = x.clone();
        let rhs = |s: f64, m: &Matrix| -(m * a_of(s));
        for k in (0..intervals).rev() {
            x = rk4_step(&rhs, nodes[k + 1], &x, -h);
            values[k] = x.clone();
        }
        Self { t0, t1, nodes, values }
    }

    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / (self.nodes.len() - 1) as f64
    }

    /// `R(t1, s)` at an arbitrary `s` in `[t0, t1]`: exact table value on a node,
    /// otherwise the nearest node corrected by one short RK4 resolvent step.
    pub fn at<F>(&self, a_of: F, s: f64) -> Matrix
    where
        F: Fn(f64) -> Matrix,
    {
        let h = self.spacing();
        let k = (((s - self.t0) / h).round().max(0.0) as usize).min(self.nodes.len() - 1);
        let sk = self.nodes[k];
        if (s - sk).abs() <= 1e-12 * (1.0 + h) {
            return self.values[k].clone();
        }
        let n = self.values[k].nrows();
        &self.values[k] * resolvent(a_of, n, s, sk, h)
    }
}
