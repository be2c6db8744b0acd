//! Lindblad master-equation dynamics.
//!
//! The generator dρ/dt = −i[H,ρ] + Σ_c D[c]ρ with
//! D[c]ρ = cρc† − ½{c†c, ρ} is vectorized by column stacking
//! (vec(AρB) = (Bᵀ⊗A)vec(ρ)) into a sparse superoperator. Jump channels are
//! the two resonator modes with thermal up/down rates κ_j(1+n_th), κ_j·n_th,
//! qubit relaxation γ·D[σ⁻] and dephasing (γ_φ/2)·D[σ_z]. The mode operators
//! represent the effective normal modes α_j when the accompanying Hamiltonian
//! is the effective model and the bare modes a_j under the full model; the
//! matrices coincide on the truncated layout.
//!
//! Time is in units of 1/ω₂. Trajectories use an adaptive embedded
//! Runge-Kutta pair (Dormand-Prince 5(4)) on the vectorized state.

use crate::error::CoreError;
use crate::hilbert::{self, FockSpaceLayout, Mode, OperatorMatrix, PauliKind};
use crate::sparse::CsrMatrix;
use crate::Result;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Invariant tolerances for a physical density matrix.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Dense-path guard for the steady-state solver: dim² must not exceed this.
pub const STEADY_STATE_DENSE_LIMIT: usize = 4096;

/// Loss rates, qubit relaxation/dephasing and thermal occupation
/// (all rates in units of ω₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
    pub n_th: f64,
}

impl DissipationParams {
    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("gamma", self.gamma),
            ("gamma_phi", self.gamma_phi),
            ("n_th", self.n_th),
        ] {
            if value < 0.0 || !value.is_finite() {
                return Err(CoreError::NegativeRate { name, value });
            }
        }
        Ok(())
    }
}

/// Density matrix with a time tag. Valid states have unit trace, are
/// Hermitian and positive semidefinite within the module tolerances.
#[derive(Debug, Clone)]
pub struct DensityState {
    matrix: DMatrix<Complex64>,
    time_tag: f64,
}

impl DensityState {
    pub fn new(matrix: DMatrix<Complex64>, time_tag: f64) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "density matrix must be square");
        Self { matrix, time_tag }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn time_tag(&self) -> f64 {
        self.time_tag
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().iter().sum()
    }

    /// max_ij |ρ_ij − conj(ρ_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..=c {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Check the trace/Hermiticity/positivity invariants, each scaled by
    /// `slack` (1.0 for the nominal tolerances).
    pub fn validate_scaled(&self, slack: f64) -> Result<()> {
        let trace_err = (self.trace() - Complex64::new(1.0, 0.0)).norm();
        if trace_err > slack * TRACE_TOL {
            return Err(CoreError::InvariantViolation {
                t: self.time_tag,
                what: "|tr rho - 1|",
                value: trace_err,
                limit: slack * TRACE_TOL,
            });
        }
        let herm = self.hermiticity_defect();
        if herm > slack * HERMITICITY_TOL {
            return Err(CoreError::InvariantViolation {
                t: self.time_tag,
                what: "max|rho - rho^dag|",
                value: herm,
                limit: slack * HERMITICITY_TOL,
            });
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -slack * POSITIVITY_TOL {
            return Err(CoreError::InvariantViolation {
                t: self.time_tag,
                what: "min eig rho",
                value: min_eig,
                limit: -slack * POSITIVITY_TOL,
            });
        }
        Ok(())
    }

    /// Check the invariants at their nominal tolerances.
    pub fn validate(&self) -> Result<()> {
        self.validate_scaled(1.0)
    }

    /// tr(ρ²), real part.
    pub fn purity(&self) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                acc += self.matrix[(r, c)] * self.matrix[(c, r)];
            }
        }
        acc.re
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
        0.5 * herm
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }

    /// Column-stacked copy of the matrix.
    pub fn to_vec(&self) -> Vec<Complex64> {
        self.matrix.as_slice().to_vec()
    }

    /// Rebuild from a column-stacked vector.
    pub fn from_vec(v: &[Complex64], dim: usize, time_tag: f64) -> Self {
        assert_eq!(v.len(), dim * dim);
        Self {
            matrix: DMatrix::from_column_slice(dim, dim, v),
            time_tag,
        }
    }
}

/// Qubit factor of an initial product state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitState {
    Ground,
    Excited,
}

/// Product state: qubit projector ⊗ thermal(n_init) ⊗ thermal(n_init), each
/// thermal factor p_m ∝ (n/(1+n))^m renormalized over the truncated ladder.
pub fn thermal_state(layout: &FockSpaceLayout, n_init: f64, qubit: QubitState) -> DensityState {
    assert!(n_init >= 0.0, "thermal occupation must be non-negative");
    let dim = layout.total_dim();
    let p1 = thermal_weights(n_init, layout.n1());
    let p2 = thermal_weights(n_init, layout.n2());
    let q = match qubit {
        QubitState::Ground => 0,
        QubitState::Excited => 1,
    };
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    let mut total = 0.0;
    for (m1, w1) in p1.iter().enumerate() {
        for (m2, w2) in p2.iter().enumerate() {
            let idx = layout.index_of(q, m1, m2);
            let w = w1 * w2;
            m[(idx, idx)] = Complex64::new(w, 0.0);
            total += w;
        }
    }
    // explicit renormalization over the truncated space
    let m = m / Complex64::new(total, 0.0);
    DensityState::new(m, 0.0)
}

fn thermal_weights(n: f64, levels: usize) -> Vec<f64> {
    if n == 0.0 {
        let mut w = vec![0.0; levels];
        w[0] = 1.0;
        return w;
    }
    let x = n / (1.0 + n);
    let weights: Vec<f64> = (0..levels).map(|m| x.powi(m as i32)).collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

/// Superoperator of −i[H,·] + Σ_c D[c]·, with parameter echoes.
#[derive(Debug, Clone)]
pub struct LiouvillianOp {
    superop: CsrMatrix,
    dim: usize,
    hamiltonian: OperatorMatrix,
    dissipation: DissipationParams,
}

impl LiouvillianOp {
    /// Hilbert-space dimension (the superoperator is dim²×dim²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &CsrMatrix {
        &self.superop
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn dissipation(&self) -> &DissipationParams {
        &self.dissipation
    }

    /// Apply to a vectorized state.
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.superop.par_matvec_into(v, out);
    }

    /// ‖vec(I)† L‖_∞: how far the generator is from exactly preserving the
    /// trace functional. Zero (to rounding) for any valid Lindblad generator.
    pub fn trace_defect(&self) -> f64 {
        let dim = self.dim;
        let mut acc = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (r, c, v) in self.superop.iter() {
            // left-multiply by vec(I): only rows r = k*dim + k contribute
            if r % dim == r / dim {
                acc[c] += v;
            }
        }
        acc.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ‖L vec(ρ)‖₂.
    pub fn residual(&self, state: &DensityState) -> f64 {
        let v = state.to_vec();
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        self.apply_into(&v, &mut out);
        out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Assemble the Liouvillian for a Hermitian Hamiltonian and the standard
/// dissipation channels on the given layout.
pub fn build_liouvillian(
    h: &OperatorMatrix,
    d: &DissipationParams,
    layout: &FockSpaceLayout,
) -> Result<LiouvillianOp> {
    let dim = layout.total_dim();
    if h.dim() != dim {
        return Err(CoreError::DimensionMismatch {
            expected: dim,
            actual: h.dim(),
        });
    }
    let defect = h.hermiticity_defect();
    if defect > hilbert::HERMITIAN_TOL {
        return Err(CoreError::NotHermitian { defect });
    }
    d.validate()?;

    let eye = CsrMatrix::identity(dim);
    let hm = h.entries();
    // -i (I ⊗ H - Hᵀ ⊗ I)
    let commutator = eye
        .kron(hm)
        .sub(&hm.transpose().kron(&eye))
        .scale(Complex64::new(0.0, -1.0));

    let mut superop = commutator;
    for (rate, op) in jump_channels(d, layout) {
        if rate == 0.0 {
            continue;
        }
        superop = superop.add(&dissipator(&op, &eye).scale(Complex64::new(rate, 0.0)));
    }

    Ok(LiouvillianOp {
        superop,
        dim,
        hamiltonian: h.clone(),
        dissipation: *d,
    })
}

/// Vectorized D[c]· = (c̄ ⊗ c) − ½(I ⊗ c†c + (c†c)ᵀ ⊗ I).
fn dissipator(c: &CsrMatrix, eye: &CsrMatrix) -> CsrMatrix {
    let cdc = c.dagger().matmul(c);
    let sandwich = c.conj().kron(c);
    let anti = eye
        .kron(&cdc)
        .add(&cdc.transpose().kron(eye))
        .scale(Complex64::new(0.5, 0.0));
    sandwich.sub(&anti)
}

fn jump_channels(d: &DissipationParams, layout: &FockSpaceLayout) -> Vec<(f64, CsrMatrix)> {
    let a1 = hilbert::annihilation(layout, Mode::One);
    let a2 = hilbert::annihilation(layout, Mode::Two);
    vec![
        ((1.0 + d.n_th) * d.kappa1, a1.entries().clone()),
        (d.n_th * d.kappa1, a1.dagger().entries().clone()),
        ((1.0 + d.n_th) * d.kappa2, a2.entries().clone()),
        (d.n_th * d.kappa2, a2.dagger().entries().clone()),
        (
            d.gamma,
            hilbert::pauli(layout, PauliKind::Lower).entries().clone(),
        ),
        (
            0.5 * d.gamma_phi,
            hilbert::pauli(layout, PauliKind::Z).entries().clone(),
        ),
    ]
}

/// One recorded observable series.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Real(v) => v.len(),
            Series::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Series::Real(v) => Some(v),
            Series::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match self {
            Series::Complex(v) => Some(v),
            Series::Real(_) => None,
        }
    }
}

/// Time series of observables emitted by the integrator. Label order is
/// insertion order and is the CSV column contract.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    series: Vec<(String, Series)>,
}

impl TrajectoryRecord {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            series: Vec::new(),
        }
    }

    /// Append a named series; its length must match `times`.
    pub fn insert(&mut self, label: impl Into<String>, series: Series) {
        assert_eq!(series.len(), self.times.len(), "series length mismatch");
        let label = label.into();
        assert!(
            self.series.iter().all(|(l, _)| *l != label),
            "duplicate series label {label}"
        );
        self.series.push((label, series));
    }

    pub fn get(&self, label: &str) -> Option<&Series> {
        self.series
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|(l, _)| l.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Series)> {
        self.series.iter().map(|(l, s)| (l.as_str(), s))
    }
}

/// Sup-norm difference between two records over their shared labels,
/// pointwise in time. Pairs where either side is non-finite (undefined-value
/// markers) are skipped. Used by the truncation convergence guard.
pub fn max_series_drift(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    let mut worst = 0.0f64;
    for (label, sa) in a.iter() {
        let Some(sb) = b.get(label) else { continue };
        match (sa, sb) {
            (Series::Real(x), Series::Real(y)) => {
                for (u, v) in x.iter().zip(y) {
                    if u.is_finite() && v.is_finite() {
                        worst = worst.max((u - v).abs());
                    }
                }
            }
            (Series::Complex(x), Series::Complex(y)) => {
                for (u, v) in x.iter().zip(y) {
                    if u.is_finite() && v.is_finite() {
                        worst = worst.max((u - v).norm());
                    }
                }
            }
            _ => {}
        }
    }
    worst
}

/// Adaptive integrator controls.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of output times at which the full (eigensolve) positivity
    /// check runs; trace and Hermiticity are checked at every output time.
    pub positivity_checkpoints: usize,
    pub max_steps: usize,
}

impl EvolveOptions {
    /// Tightened tolerances for horizons of ten thousand time units and
    /// beyond, where default-tolerance global error can eat the 1e-8
    /// positivity margin of near-pure states.
    pub fn long_horizon() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            ..Self::default()
        }
    }
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            positivity_checkpoints: 20,
            max_steps: 20_000_000,
        }
    }
}

/// Integrator output: the recorded series, the final state, and the full
/// states captured at the positivity checkpoints (time-tagged).
#[derive(Debug, Clone)]
pub struct EvolveOutput {
    pub record: TrajectoryRecord,
    pub final_state: DensityState,
    pub checkpoint_states: Vec<DensityState>,
}

/// Propagate `rho0` under `l` across `t_grid` (strictly increasing, starting
/// at 0), recording tr(ρO) for every named operator at every grid time.
/// Hermitian-hinted operators record real series, others complex. Invariants
/// are monitored along the way; drifting beyond 10× tolerance aborts.
pub fn evolve(
    rho0: &DensityState,
    l: &LiouvillianOp,
    t_grid: &[f64],
    observables: &[(String, OperatorMatrix)],
    opts: &EvolveOptions,
) -> Result<EvolveOutput> {
    validate_time_grid(t_grid)?;
    if rho0.dim() != l.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: l.dim(),
            actual: rho0.dim(),
        });
    }
    for (_, op) in observables {
        if op.dim() != l.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: l.dim(),
                actual: op.dim(),
            });
        }
    }
    rho0.validate()?;

    let dim = l.dim();
    let n_out = t_grid.len();
    let mut raw: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n_out); observables.len()];

    let checkpoint_stride = if opts.positivity_checkpoints == 0 {
        usize::MAX
    } else {
        (n_out / opts.positivity_checkpoints).max(1)
    };

    let mut y = rho0.to_vec();
    let mut stepper = DormandPrince::new(l, opts.rtol, opts.atol, opts.max_steps);
    let mut checkpoint_states = Vec::new();

    for (j, &t) in t_grid.iter().enumerate() {
        if j > 0 {
            stepper.advance(&mut y, t_grid[j - 1], t)?;
        }
        for ((_, op), series) in observables.iter().zip(raw.iter_mut()) {
            series.push(expectation_from_vec(&y, dim, op.entries()));
        }
        check_invariants_fast(&y, dim, t)?;
        if j % checkpoint_stride == 0 || j + 1 == n_out {
            let state = DensityState::from_vec(&y, dim, t);
            state.validate_scaled(10.0)?;
            checkpoint_states.push(state);
        }
    }

    let mut record = TrajectoryRecord::new(t_grid.to_vec());
    for ((label, op), series) in observables.iter().zip(raw) {
        if op.is_hermitian_hint() {
            record.insert(label.clone(), Series::Real(series.iter().map(|v| v.re).collect()));
        } else {
            record.insert(label.clone(), Series::Complex(series));
        }
    }
    let final_state = DensityState::from_vec(&y, dim, *t_grid.last().unwrap());
    Ok(EvolveOutput {
        record,
        final_state,
        checkpoint_states,
    })
}

/// Propagate an arbitrary (not necessarily unit-trace) operator under the
/// Liouvillian, invoking `visit(index, t, vectorized)` at each grid time. No
/// density-matrix invariants are enforced; used by the regression-theorem
/// correlation functions.
pub(crate) fn propagate_with(
    m0: &DMatrix<Complex64>,
    l: &LiouvillianOp,
    t_grid: &[f64],
    opts: &EvolveOptions,
    mut visit: impl FnMut(usize, f64, &[Complex64]),
) -> Result<()> {
    validate_time_grid(t_grid)?;
    let mut y: Vec<Complex64> = m0.as_slice().to_vec();
    assert_eq!(y.len(), l.dim() * l.dim());
    let mut stepper = DormandPrince::new(l, opts.rtol, opts.atol, opts.max_steps);
    for (j, &t) in t_grid.iter().enumerate() {
        if j > 0 {
            stepper.advance(&mut y, t_grid[j - 1], t)?;
        }
        visit(j, t, &y);
    }
    Ok(())
}

fn validate_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(CoreError::InvalidGrid("empty time grid".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(CoreError::InvalidGrid(format!(
            "time grid must start at 0, got {}",
            t_grid[0]
        )));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidGrid(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// tr(ρO) from the column-stacked state.
pub(crate) fn expectation_from_vec(y: &[Complex64], dim: usize, op: &CsrMatrix) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (r, c, v) in op.iter() {
        // tr(ρO) = Σ_{r,c} O_rc ρ_cr; column-stacked ρ_cr sits at r*dim + c
        acc += v * y[r * dim + c];
    }
    acc
}

fn check_invariants_fast(y: &[Complex64], dim: usize, t: f64) -> Result<()> {
    let mut trace = Complex64::new(0.0, 0.0);
    for k in 0..dim {
        trace += y[k * dim + k];
    }
    let trace_err = (trace - Complex64::new(1.0, 0.0)).norm();
    if trace_err > 10.0 * TRACE_TOL {
        return Err(CoreError::InvariantViolation {
            t,
            what: "|tr rho - 1|",
            value: trace_err,
            limit: 10.0 * TRACE_TOL,
        });
    }
    let mut herm = 0.0f64;
    for c in 0..dim {
        for r in 0..=c {
            let d = (y[c * dim + r] - y[r * dim + c].conj()).norm();
            if d > herm {
                herm = d;
            }
        }
    }
    if herm > 10.0 * HERMITICITY_TOL {
        return Err(CoreError::InvariantViolation {
            t,
            what: "max|rho - rho^dag|",
            value: herm,
            limit: 10.0 * HERMITICITY_TOL,
        });
    }
    Ok(())
}

/// Dormand-Prince 5(4) with FSAL on the vectorized state.
struct DormandPrince<'a> {
    l: &'a LiouvillianOp,
    rtol: f64,
    atol: f64,
    max_steps: usize,
    steps_taken: usize,
    h: f64,
    k: [Vec<Complex64>; 7],
    scratch: Vec<Complex64>,
    first_call: bool,
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// b5 − b4: weights of the embedded error estimate. The fifth-order update
/// itself reuses the last A row (stage 7 is FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl<'a> DormandPrince<'a> {
    fn new(l: &'a LiouvillianOp, rtol: f64, atol: f64, max_steps: usize) -> Self {
        let n = l.dim() * l.dim();
        Self {
            l,
            rtol,
            atol,
            max_steps,
            steps_taken: 0,
            h: 0.0,
            k: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]),
            scratch: vec![Complex64::new(0.0, 0.0); n],
            first_call: true,
        }
    }

    /// Advance `y` from `t0` to `t1`, landing on `t1` exactly.
    fn advance(&mut self, y: &mut [Complex64], t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        if self.first_call {
            let (k1, _) = self.k.split_at_mut(1);
            Self::rhs(self.l, y, &mut k1[0]);
            self.h = self.initial_step();
            self.first_call = false;
        }
        while t < t1 {
            if self.steps_taken >= self.max_steps {
                return Err(CoreError::IntegratorStepLimit {
                    t,
                    steps: self.steps_taken,
                });
            }
            let h = self.h.min(t1 - t);
            let err = self.try_step(y, h);
            self.steps_taken += 1;
            let err = err.max(1e-300);
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                t += h;
                // accepted: y and k1 were updated in try_step
                self.h = h * factor;
            } else {
                self.h = h * factor;
                if self.h < 1e-13 * t.abs().max(1.0) {
                    return Err(CoreError::StepSizeUnderflow { t, h: self.h });
                }
            }
        }
        Ok(())
    }

    fn rhs(l: &LiouvillianOp, y: &[Complex64], out: &mut [Complex64]) {
        l.superoperator().par_matvec_into(y, out);
    }

    fn initial_step(&self) -> f64 {
        // conservative heuristic: h0 ~ rtol^(1/5) / ||L||_inf
        let norm = self.l.superoperator().norm_inf().max(1e-12);
        (self.rtol.powf(0.2) / norm).min(0.1)
    }

    /// One trial step of size `h`. Returns the scaled error norm; on
    /// acceptance (err <= 1) `y` holds the new solution and k[0] the new
    /// derivative (FSAL).
    fn try_step(&mut self, y: &mut [Complex64], h: f64) -> f64 {
        let n = y.len();
        for stage in 0..6 {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, a) in A[stage].iter().enumerate().take(stage + 1) {
                    acc += *a * self.k[s][i];
                }
                self.scratch[i] = y[i] + h * acc;
            }
            let (done, rest) = self.k.split_at_mut(stage + 1);
            let _ = done;
            Self::rhs(self.l, &self.scratch, &mut rest[0]);
        }
        // scratch currently holds y7 = y + h Σ a6_s k_s = the 5th-order value
        // because the last A row equals B5; k[6] = f(y5) (FSAL candidate)
        let mut err_sq = 0.0f64;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for (s, w) in E.iter().enumerate() {
                e += *w * self.k[s][i];
            }
            e *= h;
            let scale = self.atol + self.rtol * y[i].norm().max(self.scratch[i].norm());
            let ratio = e.norm() / scale;
            err_sq += ratio * ratio;
        }
        let err = (err_sq / n as f64).sqrt();
        if err <= 1.0 {
            y.copy_from_slice(&self.scratch);
            let (head, tail) = self.k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]);
        }
        err
    }
}

/// Steady state as the null vector of the superoperator, found by inverse
/// iteration on the densified generator. Guarded to dim² ≤
/// [`STEADY_STATE_DENSE_LIMIT`]. The null space must be one-dimensional;
/// degeneracy is detected by a deflated second inverse iteration and
/// reported rather than resolved arbitrarily.
pub fn steady_state(l: &LiouvillianOp) -> Result<DensityState> {
    let dim = l.dim();
    let n = dim * dim;
    if n > STEADY_STATE_DENSE_LIMIT {
        return Err(CoreError::DimensionGuard {
            what: "steady_state dense solver",
            dim: n,
            guard: STEADY_STATE_DENSE_LIMIT,
        });
    }
    let dense = l.superoperator().to_dense();
    let scale = l.superoperator().norm_inf().max(1.0);
    let eps = 1e-10 * scale;
    let mut shifted = dense.clone();
    for i in 0..n {
        shifted[(i, i)] -= Complex64::new(eps, 0.0);
    }
    let lu = shifted.lu();

    // inverse iteration from the maximally mixed state
    let mut v = nalgebra::DVector::<Complex64>::zeros(n);
    for k in 0..dim {
        v[k * dim + k] = Complex64::new(1.0 / dim as f64, 0.0);
    }
    for _ in 0..50 {
        let mut w = lu.solve(&v).ok_or(CoreError::SteadyStateResidual {
            residual: f64::INFINITY,
            tol: 1e-10,
        })?;
        let norm = w.norm();
        w /= Complex64::new(norm, 0.0);
        let residual = (&dense * &w).norm();
        v = w;
        if residual <= 1e-12 * scale {
            break;
        }
    }

    // uniqueness: deflated inverse iteration estimates |λ₂|
    let gap_tol = 1e-8 * scale;
    let mut w = nalgebra::DVector::<Complex64>::zeros(n);
    w[0] = Complex64::new(1.0, 0.0);
    let proj = |x: &mut nalgebra::DVector<Complex64>, v: &nalgebra::DVector<Complex64>| {
        let overlap: Complex64 = v.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
        for (xi, vi) in x.iter_mut().zip(v.iter()) {
            *xi -= overlap * vi;
        }
    };
    proj(&mut w, &v);
    let mut growth = 0.0f64;
    for _ in 0..30 {
        let mut z = lu.solve(&w).ok_or(CoreError::SteadyStateResidual {
            residual: f64::INFINITY,
            tol: 1e-10,
        })?;
        proj(&mut z, &v);
        growth = z.norm() / w.norm().max(1e-300);
        let norm = z.norm();
        if norm == 0.0 {
            break;
        }
        w = z / Complex64::new(norm, 0.0);
    }
    // growth ≈ 1/|λ₂ − ε|; λ₂ indistinguishable from zero means degeneracy
    let lambda2 = if growth > 0.0 { 1.0 / growth } else { f64::INFINITY };
    if lambda2 < gap_tol {
        return Err(CoreError::DegenerateNullSpace {
            second: lambda2,
            tol: gap_tol,
        });
    }

    // reshape, Hermitize, trace-normalize
    let mut rho = DMatrix::<Complex64>::from_column_slice(dim, dim, v.as_slice());
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let trace: Complex64 = rho.diagonal().iter().sum();
    if trace.norm() < 1e-12 {
        return Err(CoreError::DegenerateNullSpace {
            second: trace.norm(),
            tol: 1e-12,
        });
    }
    rho /= trace;
    let state = DensityState::new(rho, f64::INFINITY);
    let residual = l.residual(&state);
    if residual > 1e-10 * scale.max(1.0) {
        return Err(CoreError::SteadyStateResidual {
            residual,
            tol: 1e-10 * scale.max(1.0),
        });
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::build_layout;
    use crate::models::{build_effective_hamiltonian, EffectiveModelParams};
    use approx::assert_abs_diff_eq;

    fn c64(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Closed-form mean occupation of the truncated geometric distribution.
    fn truncated_thermal_mean(n: f64, levels: usize) -> f64 {
        let x = n / (1.0 + n);
        let s0: f64 = (0..levels).map(|m| x.powi(m as i32)).sum();
        let s1: f64 = (0..levels).map(|m| m as f64 * x.powi(m as i32)).sum();
        s1 / s0
    }

    #[test]
    fn thermal_state_zero_temperature_is_pure() {
        let layout = build_layout(4, 4).unwrap();
        let rho = thermal_state(&layout, 0.0, QubitState::Ground);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
        let idx = layout.index_of(0, 0, 0);
        assert_abs_diff_eq!(rho.matrix()[(idx, idx)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn thermal_state_truncated_mean_occupation() {
        let layout = build_layout(6, 6).unwrap();
        let rho = thermal_state(&layout, 0.15, QubitState::Excited);
        let n1 = hilbert::number(&layout, Mode::One);
        let got = expectation_from_vec(&rho.to_vec(), layout.total_dim(), n1.entries());
        let expected = truncated_thermal_mean(0.15, 6);
        assert_abs_diff_eq!(got.re, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-14);
        // the truncation-corrected value sits just below the nominal 0.15
        assert_abs_diff_eq!(expected, 0.14997, epsilon = 5e-5);
    }

    #[test]
    fn thermal_state_trace_is_exactly_normalized() {
        let layout = build_layout(5, 3).unwrap();
        for n in [0.0, 0.05, 0.15, 0.8, 3.0] {
            let rho = thermal_state(&layout, n, QubitState::Ground);
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(rho.trace().im, 0.0, epsilon = 1e-16);
        }
    }

    fn zero_hamiltonian(layout: &FockSpaceLayout) -> OperatorMatrix {
        OperatorMatrix::new_hermitian(CsrMatrix::zeros(
            layout.total_dim(),
            layout.total_dim(),
        ))
        .unwrap()
    }

    #[test]
    fn decay_is_exponential() {
        // H = 0, single decay channel on mode 1, n_th = 0:
        // <n>(t) = <n>(0) e^{-kappa t}
        let layout = build_layout(3, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.05,
            kappa2: 0.0,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        // start in |g,1,0>
        let dim = layout.total_dim();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let idx = layout.index_of(0, 1, 0);
        m[(idx, idx)] = c64(1.0);
        let rho0 = DensityState::new(m, 0.0);
        let n1 = hilbert::number(&layout, Mode::One);
        let t_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 2.0).collect();
        let out = evolve(
            &rho0,
            &l,
            &t_grid,
            &[("n_1".to_string(), n1)],
            &EvolveOptions::default(),
        )
        .unwrap();
        let series = out.record.get("n_1").unwrap().as_real().unwrap();
        for (t, n) in t_grid.iter().zip(series) {
            assert_abs_diff_eq!(*n, (-0.05 * t).exp(), epsilon = 1e-7);
        }
    }

    #[test]
    fn thermal_channel_detailed_balance_fixed_point() {
        // H = 0, kappa > 0, n_th = 0.15: the steady occupation is the
        // truncated detailed-balance value just below 0.15
        let layout = build_layout(6, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.02,
            kappa2: 0.02,
            gamma: 0.01,
            gamma_phi: 0.0,
            n_th: 0.15,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let rho = steady_state(&l).unwrap();
        let n1 = hilbert::number(&layout, Mode::One);
        let got = expectation_from_vec(&rho.to_vec(), layout.total_dim(), n1.entries());
        let expected = truncated_thermal_mean(0.15, 6);
        assert_abs_diff_eq!(got.re, expected, epsilon = 1e-8);
        assert!((got.re - 0.15).abs() < 1e-3);
    }

    #[test]
    fn generator_preserves_trace_at_paper_rates() {
        // left null vector of L is the vectorized identity to 1e-12
        let layout = build_layout(6, 6).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.5, 1.0);
        let h = build_effective_hamiltonian(&p, &layout).unwrap();
        let d = DissipationParams {
            kappa1: 0.001,
            kappa2: 0.001,
            gamma: 0.001,
            gamma_phi: 0.01,
            n_th: 0.15,
        };
        let l = build_liouvillian(&h, &d, &layout).unwrap();
        assert!(l.trace_defect() <= 1e-12, "trace defect {}", l.trace_defect());
    }

    #[test]
    fn negative_rates_rejected() {
        let layout = build_layout(2, 2).unwrap();
        let d = DissipationParams {
            kappa1: -0.001,
            kappa2: 0.0,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        assert!(matches!(
            build_liouvillian(&zero_hamiltonian(&layout), &d, &layout),
            Err(CoreError::NegativeRate { .. })
        ));
    }

    #[test]
    fn free_evolution_keeps_number_state_stationary() {
        // L from H = omega a†a alone: populations constant, trace 1
        let layout = build_layout(3, 2).unwrap();
        let h_op = hilbert::number(&layout, Mode::One).scale(c64(1.3));
        let h = OperatorMatrix::new_hermitian(h_op.entries().clone()).unwrap();
        let d = DissipationParams {
            kappa1: 0.0,
            kappa2: 0.0,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&h, &d, &layout).unwrap();
        let dim = layout.total_dim();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let idx = layout.index_of(0, 1, 0);
        m[(idx, idx)] = c64(1.0);
        let rho0 = DensityState::new(m, 0.0);
        let n1 = hilbert::number(&layout, Mode::One);
        let t_grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let out = evolve(
            &rho0,
            &l,
            &t_grid,
            &[("n_1".to_string(), n1)],
            &EvolveOptions::default(),
        )
        .unwrap();
        for n in out.record.get("n_1").unwrap().as_real().unwrap() {
            assert_abs_diff_eq!(*n, 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(out.final_state.trace().re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn damped_mode_decays_by_e_over_one_lifetime() {
        // kappa = 0.001, t = 1000: <n> shrinks by e^{-1} within 1e-4
        let layout = build_layout(3, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.001,
            kappa2: 0.0,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let dim = layout.total_dim();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let idx = layout.index_of(0, 1, 0);
        m[(idx, idx)] = c64(1.0);
        let rho0 = DensityState::new(m, 0.0);
        let n1 = hilbert::number(&layout, Mode::One);
        let out = evolve(
            &rho0,
            &l,
            &[0.0, 1000.0],
            &[("n_1".to_string(), n1)],
            &EvolveOptions::default(),
        )
        .unwrap();
        let series = out.record.get("n_1").unwrap().as_real().unwrap();
        assert_abs_diff_eq!(series[1], (-1.0f64).exp(), epsilon = 1e-4);
    }

    #[test]
    fn qubit_relaxes_to_ground_with_mode_losses() {
        // gamma-dominant relaxation with small mode losses: unique steady
        // state is qubit ground ⊗ vacuum ⊗ vacuum
        let layout = build_layout(2, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.01,
            kappa2: 0.01,
            gamma: 0.1,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let rho = steady_state(&l).unwrap();
        let idx = layout.index_of(0, 0, 0);
        assert_abs_diff_eq!(rho.matrix()[(idx, idx)].re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn undissipated_sector_reports_degenerate_null_space() {
        // qubit relaxation only: every mode state is stationary, so the
        // null space is far from one-dimensional and must be reported
        let layout = build_layout(2, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.0,
            kappa2: 0.0,
            gamma: 0.1,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        assert!(matches!(
            steady_state(&l),
            Err(CoreError::DegenerateNullSpace { .. })
        ));
    }

    #[test]
    fn steady_state_guard_rejects_large_dims() {
        let layout = build_layout(6, 6).unwrap();
        let d = DissipationParams {
            kappa1: 0.001,
            kappa2: 0.001,
            gamma: 0.001,
            gamma_phi: 0.01,
            n_th: 0.15,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        assert!(matches!(
            steady_state(&l),
            Err(CoreError::DimensionGuard { .. })
        ));
    }

    #[test]
    fn zero_horizon_grid_records_initial_state() {
        let layout = build_layout(2, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.001,
            kappa2: 0.001,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let rho0 = thermal_state(&layout, 0.1, QubitState::Ground);
        let n1 = hilbert::number(&layout, Mode::One);
        let expected = expectation_from_vec(&rho0.to_vec(), layout.total_dim(), n1.entries());
        let out = evolve(
            &rho0,
            &l,
            &[0.0],
            &[("n_1".to_string(), n1)],
            &EvolveOptions::default(),
        )
        .unwrap();
        assert_eq!(out.record.times.len(), 1);
        let series = out.record.get("n_1").unwrap().as_real().unwrap();
        assert_abs_diff_eq!(series[0], expected.re, epsilon = 1e-14);
    }

    #[test]
    fn relative_entropy_to_fixed_point_is_monotone() {
        // H = 0 thermal dissipator with a unique fixed point: relative
        // entropy S(rho(t) || rho_ss) never increases along the output grid
        let layout = build_layout(4, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.05,
            kappa2: 0.05,
            gamma: 0.05,
            gamma_phi: 0.0,
            n_th: 0.2,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let rho_ss = steady_state(&l).unwrap();

        let rho0 = thermal_state(&layout, 1.0, QubitState::Excited);
        let t_grid: Vec<f64> = (0..=30).map(|i| i as f64 * 4.0).collect();
        let mut entropies = Vec::new();
        propagate_with(
            rho0.matrix(),
            &l,
            &t_grid,
            &EvolveOptions::default(),
            |_, _, y| {
                let rho = DensityState::from_vec(y, layout.total_dim(), 0.0);
                entropies.push(relative_entropy(&rho, &rho_ss));
            },
        )
        .unwrap();
        for w in entropies.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "relative entropy increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    fn relative_entropy(rho: &DensityState, sigma: &DensityState) -> f64 {
        // S(rho||sigma) = tr rho (ln rho - ln sigma) via eigendecompositions
        let er = rho.matrix().clone().symmetric_eigen();
        let es = sigma.matrix().clone().symmetric_eigen();
        let dim = rho.dim();
        let mut s = 0.0;
        for i in 0..dim {
            let p = er.eigenvalues[i].max(1e-300);
            if p > 1e-14 {
                s += p * p.ln();
            }
        }
        // -tr rho ln sigma = -Σ_j ln q_j <v_j|rho|v_j>
        for j in 0..dim {
            let q = es.eigenvalues[j].max(1e-300);
            let vj = es.eigenvectors.column(j);
            let mut overlap = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                for b in 0..dim {
                    overlap += vj[a].conj() * rho.matrix()[(a, b)] * vj[b];
                }
            }
            s -= overlap.re * q.ln();
        }
        s
    }

    #[test]
    fn invalid_grids_rejected() {
        let layout = build_layout(2, 2).unwrap();
        let d = DissipationParams {
            kappa1: 0.0,
            kappa2: 0.0,
            gamma: 0.0,
            gamma_phi: 0.0,
            n_th: 0.0,
        };
        let l = build_liouvillian(&zero_hamiltonian(&layout), &d, &layout).unwrap();
        let rho0 = thermal_state(&layout, 0.0, QubitState::Ground);
        for grid in [vec![], vec![1.0], vec![0.0, 1.0, 1.0]] {
            assert!(matches!(
                evolve(&rho0, &l, &grid, &[], &EvolveOptions::default()),
                Err(CoreError::InvalidGrid(_))
            ));
        }
    }

    use crate::hilbert::Mode;
}
