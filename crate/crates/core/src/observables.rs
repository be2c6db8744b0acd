//! Expectation values, second-order coherence functions and population
//! imbalances.
//!
//! Mode `c` is the cavity normal mode α₁ and mode `d` the driving mechanical
//! probe mode α₂ ([`Mode::One`]/[`Mode::Two`] respectively). g² is the
//! standard normal-ordered, normalized second-order coherence
//! ⟨α†α†αα⟩/⟨α†α⟩² — the form for which thermal light reads 2, coherent
//! light 1 and a single quantum 0. A Hermitian-quadrature variant
//! ⟨X⁴⟩/⟨X²⟩² is exposed separately for exploration; it does not share that
//! calibration.

use crate::dynamics::{self, DensityState, EvolveOptions, LiouvillianOp, Series, TrajectoryRecord};
use crate::error::CoreError;
use crate::hilbert::{self, FockSpaceLayout, Mode, OperatorMatrix, PauliKind, QuadratureScale};
use crate::Result;
use num_complex::Complex64;

/// Denominators below this occupation make g² an undefined-value marker.
pub const OCCUPATION_EPS: f64 = 1e-12;

/// Stationarity bound ‖Lρ‖ for two-time correlation inputs.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// tr(ρO). Real to 1e-10 when `o` is Hermitian.
pub fn expectation(rho: &DensityState, o: &OperatorMatrix) -> Result<Complex64> {
    if rho.dim() != o.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: rho.dim(),
            actual: o.dim(),
        });
    }
    let v = rho.to_vec();
    Ok(dynamics::expectation_from_vec(&v, rho.dim(), o.entries()))
}

/// The normal-ordered second moment operator (α†)²α² of one mode.
pub fn g2_moment_operator(layout: &FockSpaceLayout, mode: Mode) -> OperatorMatrix {
    let a = hilbert::annihilation(layout, mode);
    let a2 = a.matmul(&a);
    let mut op = a2.dagger().matmul(&a2);
    op = OperatorMatrix::new_hermitian(op.entries().clone()).expect("(a^dag)^2 a^2 Hermitian");
    op
}

/// Equal-time g²(t) = ⟨α†α†αα⟩/⟨α†α⟩² on a single state. Returns `None`
/// when the occupation is below [`OCCUPATION_EPS`] (vacuum underflow).
pub fn g2_equal_time(rho: &DensityState, layout: &FockSpaceLayout, mode: Mode) -> Option<f64> {
    let n = expectation(rho, &hilbert::number(layout, mode)).ok()?.re;
    if n < OCCUPATION_EPS {
        return None;
    }
    let moment = expectation(rho, &g2_moment_operator(layout, mode)).ok()?.re;
    Some(moment / (n * n))
}

/// Quadrature-based variant ⟨X⁴⟩/⟨X²⟩² with X = α + α†. Exposed for
/// exploration; thermal/coherent calibration differs from [`g2_equal_time`].
pub fn g2_equal_time_quadrature(
    rho: &DensityState,
    layout: &FockSpaceLayout,
    mode: Mode,
) -> Option<f64> {
    let x = hilbert::quadrature(layout, mode, QuadratureScale::Unit);
    let x2 = x.matmul(&x);
    let x4 = x2.matmul(&x2);
    let denom = expectation(rho, &x2).ok()?.re;
    if denom.abs() < OCCUPATION_EPS {
        return None;
    }
    let num = expectation(rho, &x4).ok()?.re;
    Some(num / (denom * denom))
}

/// Two-time g²(τ) = ⟨α†(0)α†(τ)α(τ)α(0)⟩/⟨α†α⟩² from a stationary state,
/// via the regression theorem: the deformed state αρ_ss α† is propagated
/// under the same Liouvillian and ⟨α†α⟩ read out at each τ. Entries are NaN
/// when the stationary occupation is below [`OCCUPATION_EPS`].
pub fn g2_two_time(
    rho_ss: &DensityState,
    l: &LiouvillianOp,
    layout: &FockSpaceLayout,
    mode: Mode,
    tau_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<f64>> {
    if rho_ss.dim() != l.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: l.dim(),
            actual: rho_ss.dim(),
        });
    }
    let residual = l.residual(rho_ss);
    if residual > STATIONARITY_TOL {
        return Err(CoreError::NotStationary {
            residual,
            limit: STATIONARITY_TOL,
        });
    }
    let a = hilbert::annihilation(layout, mode);
    let n_op = hilbert::number(layout, mode);
    let n_ss = expectation(rho_ss, &n_op)?.re;
    if n_ss < OCCUPATION_EPS {
        return Ok(vec![f64::NAN; tau_grid.len()]);
    }
    // deformed initial condition α ρ α†
    let a_dense = a.to_dense();
    let deformed = &a_dense * rho_ss.matrix() * a_dense.adjoint();
    let denom = n_ss * n_ss;
    let mut out = vec![0.0; tau_grid.len()];
    dynamics::propagate_with(&deformed, l, tau_grid, opts, |j, _t, y| {
        out[j] = dynamics::expectation_from_vec(y, l.dim(), n_op.entries()).re / denom;
    })?;
    Ok(out)
}

/// Reading of the population difference z = ⟨X⁺⟩ − ⟨α⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImbalanceConvention {
    /// Re(⟨α+α†⟩ − ⟨α⟩) = Re⟨α†⟩, the expression as stated.
    Literal,
    /// ⟨α+α†⟩ − ⟨α†α⟩: quadrature minus occupation.
    Number,
}

/// Population imbalance of one mode under the chosen convention.
pub fn population_imbalance(
    rho: &DensityState,
    layout: &FockSpaceLayout,
    mode: Mode,
    convention: ImbalanceConvention,
) -> Result<f64> {
    let x = expectation(
        rho,
        &hilbert::quadrature(layout, mode, QuadratureScale::Unit),
    )?
    .re;
    Ok(match convention {
        ImbalanceConvention::Literal => {
            let alpha = expectation(rho, &hilbert::annihilation(layout, mode))?;
            x - alpha.re
        }
        ImbalanceConvention::Number => {
            let n = expectation(rho, &hilbert::number(layout, mode))?.re;
            x - n
        }
    })
}

/// The standard trajectory observable set. Labels are a stable contract:
/// `x_plus_1`, `x_plus_2` (unit-prefactor quadratures), `alpha_1_expect`,
/// `alpha_2_expect` (complex), `n_1`, `n_2`, `g2_moment_1`, `g2_moment_2`,
/// `sigma_z`.
pub fn standard_observables(layout: &FockSpaceLayout) -> Vec<(String, OperatorMatrix)> {
    vec![
        (
            "x_plus_1".into(),
            hilbert::quadrature(layout, Mode::One, QuadratureScale::Unit),
        ),
        (
            "x_plus_2".into(),
            hilbert::quadrature(layout, Mode::Two, QuadratureScale::Unit),
        ),
        (
            "alpha_1_expect".into(),
            hilbert::annihilation(layout, Mode::One),
        ),
        (
            "alpha_2_expect".into(),
            hilbert::annihilation(layout, Mode::Two),
        ),
        ("n_1".into(), hilbert::number(layout, Mode::One)),
        ("n_2".into(), hilbert::number(layout, Mode::Two)),
        ("g2_moment_1".into(), g2_moment_operator(layout, Mode::One)),
        ("g2_moment_2".into(), g2_moment_operator(layout, Mode::Two)),
        ("sigma_z".into(), hilbert::pauli(layout, PauliKind::Z)),
    ]
}

/// Append the derived series `g2_c`, `g2_d`, `z_c`, `z_d`, `z_c_number`,
/// `z_d_number` to a record holding the standard observables (both imbalance
/// conventions are recorded). Undefined g² points are NaN markers.
pub fn attach_derived_series(record: &mut TrajectoryRecord) {
    let n = record.times.len();
    for (mode_idx, g2_label, z_label, zn_label) in [
        (1usize, "g2_c", "z_c", "z_c_number"),
        (2usize, "g2_d", "z_d", "z_d_number"),
    ] {
        let occ = record
            .get(&format!("n_{mode_idx}"))
            .and_then(Series::as_real)
            .map(<[f64]>::to_vec);
        let moment = record
            .get(&format!("g2_moment_{mode_idx}"))
            .and_then(Series::as_real)
            .map(<[f64]>::to_vec);
        let x = record
            .get(&format!("x_plus_{mode_idx}"))
            .and_then(Series::as_real)
            .map(<[f64]>::to_vec);
        let alpha = record
            .get(&format!("alpha_{mode_idx}_expect"))
            .and_then(Series::as_complex)
            .map(<[Complex64]>::to_vec);

        if let (Some(occ), Some(moment)) = (&occ, &moment) {
            let g2: Vec<f64> = (0..n)
                .map(|i| {
                    if occ[i] < OCCUPATION_EPS {
                        f64::NAN
                    } else {
                        moment[i] / (occ[i] * occ[i])
                    }
                })
                .collect();
            record.insert(g2_label, Series::Real(g2));
        }
        if let (Some(x), Some(alpha)) = (&x, &alpha) {
            let z: Vec<f64> = (0..n).map(|i| x[i] - alpha[i].re).collect();
            record.insert(z_label, Series::Real(z));
        }
        if let (Some(x), Some(occ)) = (&x, &occ) {
            let zn: Vec<f64> = (0..n).map(|i| x[i] - occ[i]).collect();
            record.insert(zn_label, Series::Real(zn));
        }
    }
}
