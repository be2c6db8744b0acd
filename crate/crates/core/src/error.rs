//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by construction, solvers and integrators.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Fock truncation too small to represent any dynamics.
    #[error("invalid Fock truncation (n1={n1}, n2={n2}): both must be >= 2")]
    InvalidLayout { n1: usize, n2: usize },

    /// Operator dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An operation required a Hermitian matrix.
    #[error("matrix is not Hermitian: max|A - A^dag| = {defect:.3e}")]
    NotHermitian { defect: f64 },

    /// k1 = k2 = 0 leaves the effective-model constants undefined.
    #[error("degenerate coupling: k1 = k2 = 0 leaves k_eff undefined")]
    DegenerateCoupling,

    /// Dissipation rates and thermal occupations must be non-negative.
    #[error("negative rate: {name} = {value}")]
    NegativeRate { name: &'static str, value: f64 },

    /// Iterative eigensolver failed to converge.
    #[error("eigensolver did not converge: residual norm {residual:.3e} after {iterations} iterations")]
    EigensolverNonConvergence { residual: f64, iterations: usize },

    /// Solver failure at a specific sweep point.
    #[error("solver failure at delta = {delta}: {source}")]
    SweepPointFailure {
        delta: f64,
        #[source]
        source: Box<CoreError>,
    },

    /// Adaptive integrator step size fell below the representable minimum.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); system too stiff for the explicit integrator")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// Adaptive integrator exceeded its step budget.
    #[error("integrator exceeded {steps} steps at t = {t:.6e}")]
    IntegratorStepLimit { t: f64, steps: usize },

    /// A density-matrix invariant drifted beyond 10x its tolerance.
    #[error("state invariant violated at t = {t:.6e}: {what} = {value:.3e} (limit {limit:.3e})")]
    InvariantViolation {
        t: f64,
        what: &'static str,
        value: f64,
        limit: f64,
    },

    /// The Liouvillian null space is not one-dimensional.
    #[error("degenerate Liouvillian null space: second-smallest eigenvalue magnitude {second:.3e} below gap tolerance {tol:.3e}")]
    DegenerateNullSpace { second: f64, tol: f64 },

    /// Steady-state residual above tolerance.
    #[error("steady-state residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SteadyStateResidual { residual: f64, tol: f64 },

    /// Input state for a two-time correlation is not stationary.
    #[error("state is not stationary: ||L rho|| = {residual:.3e} (limit {limit:.3e})")]
    NotStationary { residual: f64, limit: f64 },

    /// Dense-path dimension guard (steady state, expm-based routines).
    #[error("{what}: dimension {dim} exceeds guard {guard}")]
    DimensionGuard {
        what: &'static str,
        dim: usize,
        guard: usize,
    },

    /// Requested more eigenvalues than the matrix dimension.
    #[error("requested {m} eigenvalues of a {dim}-dimensional operator")]
    TooManyEigenvalues { m: usize, dim: usize },

    /// Empty or malformed grid.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
