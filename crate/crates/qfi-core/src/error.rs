//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Metric determinant vanished within tolerance; the point is outside the
    /// validity region of the metric.
    #[error("singular metric at {point:?} (det = {det:.3e})")]
    SingularMetric { point: Vec<f64>, det: f64 },

    #[error("operation requires dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown catalog family `{0}`")]
    UnknownFamily(String),

    #[error("catalog entries come from different metrics ({0} vs {1})")]
    MixedMetric(String, String),

    /// A defining condition residual exceeded tolerance; the candidate is not
    /// a first integral.
    #[error("condition `{condition}` violated: max residual {max_residual:.3e} > tol {tol:.3e}")]
    ConditionViolated {
        condition: String,
        max_residual: f64,
        tol: f64,
    },

    #[error("symmetry object `{0}` is not certified (residual {1:.3e})")]
    UncertifiedSymmetry(String, f64),

    #[error("integral family 3 requires lambda != 0")]
    ZeroLambda,

    #[error("geodesic specialization requires a zero potential")]
    NonzeroPotential,

    #[error("no real on-shell velocity: {0}")]
    InfeasibleEnergy(String),

    #[error("E0 = V(q0) admits only null directions, but gamma(dir, dir) != 0")]
    NullDirectionRequired,

    /// Step size collapsed near a singular locus; the partial trajectory up to
    /// the last accepted state is preserved by the caller.
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("point {0:?} is outside the validity domain")]
    OutOfDomain(Vec<f64>),

    #[error("G-quadrature: right-hand side is not integrable ({0})")]
    NonIntegrable(String),

    #[error("quadrature did not converge (estimate {estimate:.6e}, error {error:.3e})")]
    NonConvergent { estimate: f64, error: f64 },

    #[error("infeasible branch: {0}")]
    BranchInfeasible(String),

    #[error("degenerate scenario parameters: {0}")]
    DegenerateParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
