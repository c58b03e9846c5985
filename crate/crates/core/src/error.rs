use thiserror::Error;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: bad dimensions, non-finite entries, times outside an interval.
    Input,
    /// The data is well formed but the operation's hypothesis does not hold.
    Precondition,
    /// The computation itself failed or produced inconsistent diagnostics.
    Numerical,
}

#[derive(Debug, Clone, Error)]
pub enum ControlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("time {t} outside interval [{t0}, {t1}]")]
    Domain { t: f64, t0: f64, t1: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory carries no control samples")]
    MissingControls,

    #[error("Sylvester equation has no unique solution (spectral separation {separation:e})")]
    SingularEquation { separation: f64 },

    #[error("Gramian on [{t0}, {t1}] is not invertible (min eigenvalue {min_eigenvalue:e})")]
    UncontrollableInterval { t0: f64, t1: f64, min_eigenvalue: f64 },

    #[error("pair is not controllable (Kalman rank {rank} < {n})")]
    Uncontrollable { rank: usize, n: usize },

    #[error("pair is not observable (observability rank {rank} < {n})")]
    Unobservable { rank: usize, n: usize },

    #[error("matrix is not stable (spectral abscissa {omega:e}); no Lyapunov certificate")]
    NoCertificate { omega: f64 },

    #[error("finite cost condition fails: unstable mode {re}{im:+}i is not reachable")]
    FiniteCostViolation { re: f64, im: f64 },

    #[error("decay rate {lambda} too small: the weighted Gramian needs lambda > {min_lambda}")]
    LambdaTooSmall { lambda: f64, min_lambda: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("linear test inapplicable: linearized Gramian min eigenvalue {min_eigenvalue:e}")]
    LinearTestInapplicable { min_eigenvalue: f64 },

    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent verdicts: {0}")]
    InconsistentVerdicts(String),

    #[error("Riccati solution escaped at t = {t} (norm {norm:e})")]
    EscapeTime { t: f64, norm: f64 },

    #[error("no convergence after horizon {horizon} (last change {change:e})")]
    Convergence { horizon: f64, change: f64 },

    #[error("fixed-point iteration left the trust ball after {} iterations", history.len())]
    Divergence { history: Vec<f64> },

    #[error("vector field evaluation failed: {0}")]
    Evaluation(String),
}

impl ControlError {
    pub fn class(&self) -> ErrorClass {
        use ControlError::*;
        match self {
            Dimension(_) | NonFinite(_) | Domain { .. } | InvalidInput(_) | MissingControls => {
                ErrorClass::Input
            }
            SingularEquation { .. }
            | UncontrollableInterval { .. }
            | Uncontrollable { .. }
            | Unobservable { .. }
            | NoCertificate { .. }
            | FiniteCostViolation { .. }
            | LambdaTooSmall { .. }
            | Precondition(_)
            | LinearTestInapplicable { .. } => ErrorClass::Precondition,
            Conditioning(_)
            | Numerical(_)
            | InconsistentVerdicts(_)
            | EscapeTime { .. }
            | Convergence { .. }
            | Divergence { .. }
            | Evaluation(_) => ErrorClass::Numerical,
        }
    }

    /// Stable identifier reported by the CLI.
    pub fn name(&self) -> &'static str {
        use ControlError::*;
        match self {
            Dimension(_) => "dimension",
            NonFinite(_) => "non_finite",
            Domain { .. } => "domain",
            InvalidInput(_) => "invalid_input",
            MissingControls => "missing_controls",
            SingularEquation { .. } => "singular_equation",
            UncontrollableInterval { .. } => "uncontrollable_interval",
            Uncontrollable { .. } => "uncontrollable",
            Unobservable { .. } => "unobservable",
            NoCertificate { .. } => "no_certificate",
            FiniteCostViolation { .. } => "finite_cost_violation",
            LambdaTooSmall { .. } => "lambda_too_small",
            Precondition(_) => "precondition",
            LinearTestInapplicable { .. } => "linear_test_inapplicable",
            Conditioning(_) => "conditioning",
            Numerical(_) => "numerical",
            InconsistentVerdicts(_) => "inconsistent_verdicts",
            EscapeTime { .. } => "escape_time",
            Convergence { .. } => "convergence",
            Divergence { .. } => "divergence",
            Evaluation(_) => "evaluation",
        }
    }
}

pub type Result<T, E = ControlError> = std::result::Result<T, E>;
