use crate::lti::{check_grid, simulate, ControlSignal, LtiSystem, Trajectory};
use crate::numkernel::{check_finite, check_square, numerical_rank, Matrix, ToleranceConfig, Vector};
use crate::observability::observability_matrix;
use crate::stability::{spectral_abscissa, STABILITY_MARGIN};
use crate::{ControlError, Result};

use super::placement::pole_place;
use super::poly::MonicPolynomial;

#[derive(Debug, Clone)]
pub struct ObserverGain {
    pub l: Matrix,
    /// `ω(A + LC)`
    pub closed_loop_abscissa: f64,
}

/// Output injection `L` with `χ_{A+LC}` equal to `target`, found by placing
/// the poles of the dual pair `(Aᵀ, Cᵀ)`.
pub fn design_observer(a: &Matrix, c: &Matrix, target: &MonicPolynomial, cfg: &ToleranceConfig) -> Result<ObserverGain> {
    check_square(a, "A")?;
    let n = a.nrows();
    if c.ncols() != n {
        return Err(ControlError::Dimension(format!("C has {} columns, A is {n}x{n}", c.ncols())));
    }
    check_finite(a, "A")?;
    check_finite(c, "C")?;
    let rank = numerical_rank(&observability_matrix(a, c), cfg);
    if rank < n {
        return Err(ControlError::Unobservable { rank, n });
    }
    let l = pole_place(&a.transpose(), &c.transpose(), target, cfg)?.f.transpose();
    let closed_loop_abscissa = spectral_abscissa(&(a + &l * c))?;
    if closed_loop_abscissa >= -STABILITY_MARGIN {
        return Err(ControlError::Precondition(format!(
            "target polynomial is not stable (observer abscissa {closed_loop_abscissa:e})"
        )));
    }
    Ok(ObserverGain { l, closed_loop_abscissa })
}

/// Plant under observer-based feedback `u = K x̂`.
#[derive(Debug, Clone)]
pub struct ObserverClosedLoop {
    /// `[[A + BK, BK], [0, A + LC]]` acting on `(x, e = x̂ - x)`.
    pub augmented: Matrix,
    /// `[[A, BK], [-LC, A + LC + BK]]` acting on `(x, x̂)`.
    pub coupled: Matrix,
    pub k: Matrix,
    n: usize,
}

#[derive(Debug, Clone)]
pub struct ObserverRun {
    /// Plant state, with the applied input `K x̂` as controls.
    pub x: Trajectory,
    pub xhat: Trajectory,
}

pub fn closed_loop_observer_system(a: &Matrix, b: &Matrix, c: &Matrix, k: &Matrix, l: &Matrix) -> Result<ObserverClosedLoop> {
    check_square(a, "A")?;
    let n = a.nrows();
    let p = b.ncols();
    let m = c.nrows();
    if b.nrows() != n || c.ncols() != n || k.shape() != (p, n) || l.shape() != (n, m) {
        return Err(ControlError::Dimension(format!(
            "incompatible shapes: A {n}x{n}, B {:?}, C {:?}, K {:?}, L {:?}",
            b.shape(),
            c.shape(),
            k.shape(),
            l.shape()
        )));
    }
    let bk = b * k;
    let lc = l * c;
    let mut augmented = Matrix::zeros(2 * n, 2 * n);
    augmented.view_mut((0, 0), (n, n)).copy_from(&(a + &bk));
    augmented.view_mut((0, n), (n, n)).copy_from(&bk);
    augmented.view_mut((n, n), (n, n)).copy_from(&(a + &lc));
    let mut coupled = Matrix::zeros(2 * n, 2 * n);
    coupled.view_mut((0, 0), (n, n)).copy_from(a);
    coupled.view_mut((0, n), (n, n)).copy_from(&bk);
    coupled.view_mut((n, 0), (n, n)).copy_from(&(-&lc));
    coupled.view_mut((n, n), (n, n)).copy_from(&(a + &lc + &bk));
    Ok(ObserverClosedLoop { augmented, coupled, k: k.clone(), n })
}

impl ObserverClosedLoop {
    /// Integrates plant and observer `x̂' = (A + LC) x̂ - L y + B K x̂` with `y = C x`.
    pub fn simulate(&self, x0: &Vector, xhat0: &Vector, grid: &[f64], cfg: &ToleranceConfig) -> Result<ObserverRun> {
        check_grid(grid)?;
        let n = self.n;
        if x0.len() != n || xhat0.len() != n {
            return Err(ControlError::Dimension(format!("initial states must have length {n}")));
        }
        // integrated in (x, e) so that the error block stays decoupled
        let sys = LtiSystem::new(self.augmented.clone(), Matrix::zeros(2 * n, 1), None)?;
        let e0 = xhat0 - x0;
        let z0 = Vector::from_iterator(2 * n, x0.iter().chain(e0.iter()).copied());
        let u = ControlSignal::zero(grid[0], *grid.last().unwrap(), 1);
        let run = simulate(&sys, &z0, &u, grid, cfg)?;
        let xs: Vec<Vector> = run.states.iter().map(|z| z.rows(0, n).into_owned()).collect();
        let xhats: Vec<Vector> = run.states.iter().map(|z| z.rows(0, n) + z.rows(n, n)).collect();
        let inputs = xhats.iter().map(|xh| &self.k * xh).collect();
        Ok(ObserverRun {
            x: Trajectory::new(grid.to_vec(), xs, Some(inputs))?,
            xhat: Trajectory::new(grid.to_vec(), xhats, None)?,
        })
    }
}
