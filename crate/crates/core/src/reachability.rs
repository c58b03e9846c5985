//! Controllability: Kalman matrix and rank, Hautus test, controllability
//! Gramians, minimum-energy steering and the Kalman decomposition.

use std::sync::Arc;

use num_complex::Complex64;

use crate::lti::{simulate, uniform_grid, ControlSignal, LinearDynamics, LtiSystem};
use crate::numkernel::{step_count, 
    eigenvalues, expm, numerical_rank, orthonormal_split, symmetrize, Matrix,
    ResolventTable, ToleranceConfig, Vector,
};
use crate::{ControlError, Result};

#[derive(Debug, Clone)]
pub struct ControllabilityReport {
    /// `[B, AB, ..., A^{n-1} B]`
    pub kalman_matrix: Matrix,
    pub rank: usize,
    pub controllable: bool,
    /// Orthonormal basis of the reachable subspace.
    pub reachable_basis: Matrix,
    /// Orthonormal basis of its orthogonal complement.
    pub unreachable_basis: Matrix,
}

pub fn kalman_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let p = b.ncols();
    let mut m = Matrix::zeros(n, n * p);
    let mut block = b.clone();
    for k in 0..n {
        m.view_mut((0, k * p), (n, p)).copy_from(&block);
        if k + 1 < n {
            block = a * &block;
        }
    }
    m
}

pub fn kalman_test(sys: &LtiSystem, cfg: &ToleranceConfig) -> ControllabilityReport {
    let m = kalman_matrix(sys.a(), sys.b());
    let rank = numerical_rank(&m, cfg);
    let (reachable_basis, unreachable_basis) = orthonormal_split(&m, cfg);
    ControllabilityReport {
        rank,
        controllable: rank == sys.n(),
        kalman_matrix: m,
        reachable_basis,
        unreachable_basis,
    }
}

/// Rank over `C` of `[λI - A, B]`, evaluated on the real doubling
/// `[[Re, -Im], [Im, Re]]` whose rank is twice the complex rank.
pub fn pbh_rank(a: &Matrix, b: &Matrix, lambda: Complex64, cfg: &ToleranceConfig) -> usize {
    let n = a.nrows();
    let p = b.ncols();
    let mut re = Matrix::zeros(n, n + p);
    let mut im = Matrix::zeros(n, n + p);
    re.view_mut((0, 0), (n, n)).copy_from(&(Matrix::identity(n, n) * lambda.re - a));
    re.view_mut((0, n), (n, p)).copy_from(b);
    for i in 0..n {
        im[(i, i)] = lambda.im;
    }
    if lambda.im == 0.0 {
        return numerical_rank(&re, cfg);
    }
    let w = n + p;
    let mut big = Matrix::zeros(2 * n, 2 * w);
    big.view_mut((0, 0), (n, w)).copy_from(&re);
    big.view_mut((0, w), (n, w)).copy_from(&(-&im));
    big.view_mut((n, 0), (n, w)).copy_from(&im);
    big.view_mut((n, w), (n, w)).copy_from(&re);
    numerical_rank(&big, cfg) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct HautusRecord {
    pub lambda: Complex64,
    /// Rank of `[λI - A, B]`.
    pub rank: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HautusReport {
    pub records: Vec<HautusRecord>,
    pub pass: bool,
}

/// Checks `rank [λI - A, B] = n` at every eigenvalue of `A`.
pub fn hautus_test(sys: &LtiSystem, cfg: &ToleranceConfig) -> Result<HautusReport> {
    let n = sys.n();
    let spectrum = eigenvalues(sys.a())?;
    let records: Vec<HautusRecord> = spectrum
        .iter()
        .map(|&lambda| {
            let rank = pbh_rank(sys.a(), sys.b(), lambda, cfg);
            HautusRecord { lambda, rank, pass: rank == n }
        })
        .collect();
    let pass = records.iter().all(|r| r.pass);
    Ok(HautusReport { records, pass })
}

#[derive(Debug, Clone)]
pub struct GramianReport {
    pub gramian: Matrix,
    pub interval: (f64, f64),
    pub min_eigenvalue: f64,
    pub invertible: bool,
}

impl GramianReport {
    /// `gramian = L Lᵀ`; the verdict is a rank decision on `weighted`, a factor
    /// whose column blocks are those of `L` rescaled by positive weights.
    ///
    /// Positive weights leave the kernel of the Gramian unchanged, and
    /// normalizing each block by the size of the transition matrix removes the
    /// exponential dynamic range that long horizons put between the blocks.
    /// The factor is rank deficient when its smallest singular value is below
    /// `max(rows, cols) · ε · σ_max`, the usual floating-point rank tolerance.
    pub(crate) fn from_factors(factor: &Matrix, weighted: &Matrix, interval: (f64, f64)) -> Self {
        let n = factor.nrows();
        let gramian = symmetrize(&(factor * factor.transpose()));
        if n == 0 || weighted.ncols() < n {
            return Self { gramian, interval, min_eigenvalue: 0.0, invertible: false };
        }
        let min_eigenvalue = gramian.clone().symmetric_eigenvalues().min();
        let sv = weighted.clone().singular_values();
        let cutoff = weighted.ncols().max(n) as f64 * f64::EPSILON * sv.max();
        let invertible = sv.max() > 0.0 && sv.min() > cutoff;
        Self { gramian, interval, min_eigenvalue, invertible }
    }
}

// R(t1, s) on a uniform node set, with exact-on-node lookup and a local
// correction between nodes.
#[derive(Clone)]
pub(crate) enum Transition {
    Constant { a: Matrix, nodes: Vec<f64>, values: Vec<Matrix> },
    Varying { sys: Arc<dyn LinearDynamics>, table: ResolventTable },
}

impl Transition {
    pub(crate) fn build(sys: Arc<dyn LinearDynamics>, t0: f64, t1: f64, intervals: usize) -> Result<Self> {
        if let Some(lti) = sys.as_lti() {
            let nodes = uniform_grid(t0, t1, intervals);
            let h = (t1 - t0) / intervals as f64;
            let step = expm(&(lti.a() * h))?;
            let mut values = vec![Matrix::zeros(0, 0); intervals + 1];
            let mut cur = Matrix::identity(lti.n(), lti.n());
            for k in (0..=intervals).rev() {
                values[k] = cur.clone();
                if k > 0 {
                    cur = &cur * &step;
                }
            }
            Ok(Transition::Constant { a: lti.a().clone(), nodes, values })
        } else {
            let n = sys.n();
            let s2 = sys.clone();
            let table = ResolventTable::build(move |t| s2.a_at(t), n, t0, t1, intervals);
            Ok(Transition::Varying { sys, table })
        }
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        match self {
            Transition::Constant { nodes, .. } => nodes,
            Transition::Varying { table, .. } => &table.nodes,
        }
    }

    pub(crate) fn node_values(&self) -> &[Matrix] {
        match self {
            Transition::Constant { values, .. } => values,
            Transition::Varying { table, .. } => &table.values,
        }
    }

    /// `R(t1, t0)`.
    pub(crate) fn full(&self) -> &Matrix {
        &self.node_values()[0]
    }

    pub(crate) fn at(&self, s: f64) -> Matrix {
        match self {
            Transition::Constant { a, nodes, values } => {
                let h = nodes[1] - nodes[0];
                let k = (((s - nodes[0]) / h).round().max(0.0) as usize).min(nodes.len() - 1);
                let d = nodes[k] - s;
                if d.abs() <= 1e-12 * (1.0 + h) {
                    values[k].clone()
                } else {
                    // e^{(t1 - s)A} = e^{(t1 - s_k)A} e^{(s_k - s)A}
                    &values[k] * expm(&(a * d)).expect("finite matrix exponential")
                }
            }
            Transition::Varying { sys, table } => table.at(|t| sys.a_at(t), s),
        }
    }
}

pub(crate) fn steering_intervals(t0: f64, t1: f64, cfg: &ToleranceConfig) -> usize {
    step_count(t1 - t0, cfg.ode_step)
}

/// Composite Simpson square-root factor with columns `√w_k R(t1, s_k) B(s_k)`,
/// and the same blocks divided by `‖R(t1, s_k)‖_F`.
pub(crate) fn gramian_factors<D: LinearDynamics + ?Sized>(sys: &D, tr: &Transition) -> (Matrix, Matrix) {
    let nodes = tr.nodes();
    let last = nodes.len() - 1;
    let h = nodes[1] - nodes[0];
    let n = sys.n();
    let p = sys.p();
    let mut factor = Matrix::zeros(n, p * nodes.len());
    let mut weighted = factor.clone();
    for (k, (&s, r)) in nodes.iter().zip(tr.node_values()).enumerate() {
        let w = if k == 0 || k == last { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let blk = r * sys.b_at(s) * (w * h / 3.0).sqrt();
        weighted.view_mut((0, k * p), (n, p)).copy_from(&(&blk / r.norm()));
        factor.view_mut((0, k * p), (n, p)).copy_from(&blk);
    }
    (factor, weighted)
}

pub(crate) fn gramian_report<D: LinearDynamics + ?Sized>(sys: &D, tr: &Transition, interval: (f64, f64)) -> GramianReport {
    let (factor, weighted) = gramian_factors(sys, tr);
    GramianReport::from_factors(&factor, &weighted, interval)
}

fn check_interval<D: LinearDynamics + ?Sized>(sys: &D, t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite()) || t0 >= t1 {
        return Err(ControlError::InvalidInput(format!("Gramian interval [{t0}, {t1}] needs t0 < t1")));
    }
    if let Some((a, b)) = sys.interval() {
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if t0 < a - slack {
            return Err(ControlError::Domain { t: t0, t0: a, t1: b });
        }
        if t1 > b + slack {
            return Err(ControlError::Domain { t: t1, t0: a, t1: b });
        }
    }
    Ok(())
}

/// `∫_{t0}^{t1} R(t1, s) B(s) B(s)ᵀ R(t1, s)ᵀ ds` by composite Simpson with node
/// spacing at most `cfg.ode_step / 2`.
pub fn controllability_gramian<D: LinearDynamics + Clone + 'static>(
    sys: &D,
    t0: f64,
    t1: f64,
    cfg: &ToleranceConfig,
) -> Result<GramianReport> {
    check_interval(sys, t0, t1)?;
    let tr = Transition::build(Arc::new(sys.clone()), t0, t1, 2 * steering_intervals(t0, t1, cfg))?;
    Ok(gramian_report(sys, &tr, (t0, t1)))
}

/// Minimum-norm control steering `x0` at `t0` to `x1` at `t1`.
#[derive(Debug, Clone)]
pub struct MinEnergyControl {
    pub control: ControlSignal,
    /// `⟨z, x1 - R(t1, t0) x0⟩ = ⟨z, 𝔠 z⟩`, the squared L² norm of the control.
    pub predicted_cost: f64,
    /// Multiplier `z = 𝔠⁻¹ (x1 - R(t1, t0) x0)`.
    pub multiplier: Vector,
    pub gramian: GramianReport,
    /// Uniform grid on which the control is sampled exactly; use it for simulation.
    pub grid: Vec<f64>,
}

/// `ũ(s) = B(s)ᵀ R(t1, s)ᵀ z`.
pub fn min_energy_control<D: LinearDynamics + Clone + 'static>(
    sys: &D,
    t0: f64,
    t1: f64,
    x0: &Vector,
    x1: &Vector,
    cfg: &ToleranceConfig,
) -> Result<MinEnergyControl> {
    check_interval(sys, t0, t1)?;
    let n = sys.n();
    if x0.len() != n || x1.len() != n {
        return Err(ControlError::Dimension(format!(
            "endpoints have lengths {} and {}, state dimension is {n}",
            x0.len(),
            x1.len()
        )));
    }
    let intervals = steering_intervals(t0, t1, cfg);
    let shared: Arc<dyn LinearDynamics> = Arc::new(sys.clone());
    let tr = Transition::build(shared.clone(), t0, t1, 2 * intervals)?;
    let gramian = gramian_report(sys, &tr, (t0, t1));
    if !gramian.invertible {
        return Err(ControlError::UncontrollableInterval { t0, t1, min_eigenvalue: gramian.min_eigenvalue });
    }
    let chol = gramian.gramian.clone().cholesky();
    let lu = gramian.gramian.clone().lu();
    let solve = |rhs: &Vector| {
        chol.as_ref()
            .map(|c| c.solve(rhs))
            .or_else(|| lu.solve(rhs))
            .ok_or_else(|| ControlError::Conditioning("Gramian solve failed".into()))
    };
    let gap = x1 - tr.full() * x0;
    let mut z = solve(&gap)?;
    let grid = uniform_grid(t0, t1, intervals);

    // Quadrature and integrator disagree slightly; on a poorly conditioned
    // Gramian that gap is amplified, so the multiplier is refined against the
    // simulated endpoint.
    let target = cfg.residual_tol * 1e-2 * (1.0 + x1.norm());
    for _ in 0..2 {
        let control = transition_control(shared.clone(), tr.clone(), z.clone(), t0, t1);
        let end = simulate(&*shared, x0, &control, &grid, cfg)?;
        let miss = x1 - end.final_state();
        if miss.norm() <= target {
            break;
        }
        z += solve(&miss)?;
    }
    let predicted_cost = z.dot(&gap);

    let control = transition_control(shared, tr, z.clone(), t0, t1);
    Ok(MinEnergyControl { control, predicted_cost, multiplier: z, gramian, grid })
}

pub(crate) fn transition_control(
    sys: Arc<dyn LinearDynamics>,
    tr: Transition,
    z: Vector,
    t0: f64,
    t1: f64,
) -> ControlSignal {
    let p = sys.p();
    ControlSignal::from_fn(t0, t1, p, move |s| sys.b_at(s).transpose() * (tr.at(s).transpose() * &z))
}

#[derive(Debug, Clone)]
pub struct KalmanDecomposition {
    /// Orthogonal change of basis `[reachable | complement]`.
    pub t: Matrix,
    pub r: usize,
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub b1: Matrix,
}

/// Block form `Tᵀ A T = [[A1, A2], [0, A3]]`, `Tᵀ B = [B1; 0]`.
pub fn kalman_decomposition(sys: &LtiSystem, cfg: &ToleranceConfig) -> KalmanDecomposition {
    let report = kalman_test(sys, cfg);
    let n = sys.n();
    let p = sys.p();
    let r = report.rank;
    let mut t = Matrix::zeros(n, n);
    t.view_mut((0, 0), (n, r)).copy_from(&report.reachable_basis);
    t.view_mut((0, r), (n, n - r)).copy_from(&report.unreachable_basis);
    let at = t.transpose() * sys.a() * &t;
    let bt = t.transpose() * sys.b();
    KalmanDecomposition {
        a1: at.view((0, 0), (r, r)).into_owned(),
        a2: at.view((0, r), (r, n - r)).into_owned(),
        a3: at.view((r, r), (n - r, n - r)).into_owned(),
        b1: bt.view((0, 0), (r, p)).into_owned(),
        t,
        r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{simulate, LtvSystem};
    use crate::numkernel::simpson_uniform;

    fn cfg() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn mat(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn pendulum() -> LtiSystem {
        LtiSystem::new(mat(2, 2, &[0.0, 1.0, 1.0, 0.0]), mat(2, 1, &[0.0, 1.0]), None).unwrap()
    }

    fn diag12() -> LtiSystem {
        LtiSystem::new(mat(2, 2, &[1.0, 0.0, 0.0, 2.0]), mat(2, 1, &[1.0, 0.0]), None).unwrap()
    }

    #[test]
    fn pendulum_kalman_matrix() {
        let rep = kalman_test(&pendulum(), &cfg());
        assert_eq!(rep.kalman_matrix, mat(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(rep.rank, 2);
        assert!(rep.controllable);
    }

    #[test]
    fn zero_system_uncontrollable() {
        let sys = LtiSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1), None).unwrap();
        let rep = kalman_test(&sys, &cfg());
        assert_eq!(rep.rank, 0);
        assert!(!rep.controllable);
        assert_eq!(rep.unreachable_basis.ncols(), 2);
    }

    #[test]
    fn diagonal_with_zero_input_entry() {
        let rep = kalman_test(&diag12(), &cfg());
        assert_eq!(rep.rank, 1);
        assert!(!rep.controllable);
        let h = hautus_test(&diag12(), &cfg()).unwrap();
        assert!(!h.pass);
        let failing: Vec<_> = h.records.iter().filter(|r| !r.pass).collect();
        assert_eq!(failing.len(), 1);
        assert!((failing[0].lambda.re - 2.0).abs() < 1e-12);
        assert_eq!(failing[0].rank, 1);
    }

    #[test]
    fn hautus_full_input() {
        let sys = LtiSystem::new(mat(2, 2, &[0.3, -1.0, 2.0, 0.1]), Matrix::identity(2, 2), None).unwrap();
        assert!(hautus_test(&sys, &cfg()).unwrap().pass);
        assert!(hautus_test(&pendulum(), &cfg()).unwrap().pass);
    }

    #[test]
    fn hautus_complex_eigenvalues() {
        // rotation block decoupled from the input
        let sys = LtiSystem::new(
            mat(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0]),
            mat(3, 1, &[0.0, 0.0, 1.0]),
            None,
        )
        .unwrap();
        let h = hautus_test(&sys, &cfg()).unwrap();
        assert!(!h.pass);
        assert!(h.records.iter().filter(|r| r.lambda.im != 0.0).all(|r| !r.pass && r.rank == 2));
        assert!(!kalman_test(&sys, &cfg()).controllable);
    }

    #[test]
    fn scalar_gramians() {
        let integ = LtiSystem::new(Matrix::zeros(1, 1), Matrix::identity(1, 1), None).unwrap();
        let g = controllability_gramian(&integ, 0.0, 1.0, &cfg()).unwrap();
        assert!((g.gramian[(0, 0)] - 1.0).abs() < 1e-14);

        let a = 1.0f64;
        let sys = LtiSystem::new(Matrix::from_element(1, 1, a), Matrix::identity(1, 1), None).unwrap();
        let g = controllability_gramian(&sys, 0.0, 1.0, &cfg()).unwrap();
        let exact = ((2.0 * a).exp() - 1.0) / (2.0 * a);
        assert!((g.gramian[(0, 0)] - exact).abs() < 1e-9);
        assert!(g.invertible);
    }

    #[test]
    fn time_varying_path_matches_constant_path() {
        let sys = pendulum();
        let ltv = LtvSystem::from_lti(&sys, 0.0, 1.0).unwrap();
        let g1 = controllability_gramian(&sys, 0.0, 1.0, &cfg()).unwrap();
        let g2 = controllability_gramian(&ltv, 0.0, 1.0, &cfg()).unwrap();
        assert!((g1.gramian - g2.gramian).norm() < 1e-9);

        let zero = LtiSystem::new(Matrix::zeros(1, 1), Matrix::identity(1, 1), None).unwrap();
        let zltv = LtvSystem::from_lti(&zero, 0.0, 1.0).unwrap();
        let g = controllability_gramian(&zltv, 0.0, 1.0, &cfg()).unwrap();
        assert!((g.gramian[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gramian_interval_errors() {
        assert!(controllability_gramian(&pendulum(), 1.0, 1.0, &cfg()).is_err());
        let ltv = LtvSystem::from_lti(&pendulum(), 0.0, 1.0).unwrap();
        assert!(matches!(
            controllability_gramian(&ltv, 0.0, 2.0, &cfg()),
            Err(ControlError::Domain { .. })
        ));
    }

    #[test]
    fn scalar_integrator_steering() {
        let sys = LtiSystem::new(Matrix::zeros(1, 1), Matrix::identity(1, 1), None).unwrap();
        let me = min_energy_control(&sys, 0.0, 1.0, &Vector::zeros(1), &Vector::from_element(1, 1.0), &cfg()).unwrap();
        assert!((me.predicted_cost - 1.0).abs() < 1e-12);
        for s in [0.0, 0.3, 0.77, 1.0] {
            assert!((me.control.eval(s)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_flight_needs_no_control() {
        let sys = pendulum();
        let x0 = Vector::from_vec(vec![0.2, -0.1]);
        let x1 = expm(sys.a()).unwrap() * &x0;
        let me = min_energy_control(&sys, 0.0, 1.0, &x0, &x1, &cfg()).unwrap();
        assert!(me.predicted_cost.abs() < 1e-20);
        assert!(me.control.eval(0.5).norm() < 1e-10);
    }

    #[test]
    fn double_integrator_steering_reaches_target() {
        let sys = LtiSystem::new(mat(2, 2, &[0.0, 1.0, 0.0, 0.0]), mat(2, 1, &[0.0, 1.0]), None).unwrap();
        let x0 = Vector::zeros(2);
        let x1 = Vector::from_vec(vec![1.0, 0.0]);
        let me = min_energy_control(&sys, 0.0, 1.0, &x0, &x1, &cfg()).unwrap();
        let tr = simulate(&sys, &x0, &me.control, &me.grid, &cfg()).unwrap();
        assert!((tr.final_state() - &x1).norm() <= 1e-6 * (1.0 + x1.norm()));
        // ∫ ũ² by quadrature against ⟨z, 𝔠 z⟩
        let sq: Vec<f64> = me.grid.iter().map(|&s| me.control.eval(s).norm_squared()).collect();
        let h = me.grid[1] - me.grid[0];
        let cost = simpson_uniform(&sq, h).unwrap();
        assert!((cost - me.predicted_cost).abs() < 1e-8, "{cost} vs {}", me.predicted_cost);
        // closed form: ũ(s) = 6 - 12 s, cost 12
        assert!((me.predicted_cost - 12.0).abs() < 1e-8);
    }

    #[test]
    fn uncontrollable_interval_error() {
        let err = min_energy_control(&diag12(), 0.0, 1.0, &Vector::zeros(2), &Vector::from_vec(vec![0.0, 1.0]), &cfg())
            .unwrap_err();
        assert!(matches!(err, ControlError::UncontrollableInterval { .. }));
    }

    #[test]
    fn decomposition_examples() {
        let kd = kalman_decomposition(&diag12(), &cfg());
        assert_eq!(kd.r, 1);
        assert!((kd.a1[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((kd.b1[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((kd.a3[(0, 0)] - 2.0).abs() < 1e-12);

        let kd = kalman_decomposition(&pendulum(), &cfg());
        assert_eq!(kd.r, 2);
        assert_eq!(kd.a3.shape(), (0, 0));
        assert_eq!(kd.a2.shape(), (2, 0));

        let zero = LtiSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1), None).unwrap();
        let kd = kalman_decomposition(&zero, &cfg());
        assert_eq!(kd.r, 0);
        assert_eq!(kd.a3, Matrix::zeros(2, 2));
    }
}
