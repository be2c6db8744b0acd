//! Full and effective Hamiltonians of the hybrid qubit + two-resonator
//! system.
//!
//! The full model couples the qubit to both bare modes through σ_x and adds a
//! radiation-pressure nonlinearity J·a₁†a₁(a₂+a₂†). The effective
//! two-frequency coupled-resonator model rewrites the system in normal modes
//! α₁ (privileged) and α₂ (disadvantaged) with derived constants ω_eff,
//! k_eff, ω′ and c₂; there the qubit couples through σ_z. Both forms are
//! implemented exactly as stated, including the k_eff (not k_eff²)
//! denominators in the effective frequencies.

use crate::error::CoreError;
use crate::hilbert::{self, FockSpaceLayout, Mode, OperatorMatrix, PauliKind};
use crate::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Parameters of the full model: qubit frequency ω, bare cavity and
/// mechanical frequencies ω₁, ω₂, qubit couplings λ₁, λ₂ and
/// radiation-pressure strength J. All frequencies in units of ω₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelParams {
    pub omega: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub j_coupling: f64,
}

/// Parameters of the effective coupled-resonator model: qubit frequency ω,
/// bare frequencies ω₁, ω₂, qubit-resonator couplings k₁, k₂ and hopping /
/// nonlinearity strength J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModelParams {
    pub omega: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub k1: f64,
    pub k2: f64,
    pub j_coupling: f64,
}

impl EffectiveModelParams {
    /// Symmetric couplings k1 = k2 = k, as quoted in figure captions.
    pub fn symmetric(omega: f64, omega1: f64, omega2: f64, k: f64, j: f64) -> Self {
        Self {
            omega,
            omega1,
            omega2,
            k1: k,
            k2: k,
            j_coupling: j,
        }
    }
}

/// Constants derived from the effective-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Effective (privileged) mode frequency (ω₁k₁² + ω₂k₂²)/k_eff.
    pub omega_eff: f64,
    /// Combined qubit-resonator coupling sqrt(k₁² + k₂²).
    pub k_eff: f64,
    /// Disadvantaged-mode frequency (ω₁k₂² + ω₂k₁²)/k_eff.
    pub omega_prime: f64,
    /// Mode-mixing strength Δ·k₁k₂/k_eff².
    pub c2: f64,
    /// Frequency difference ω₁ − ω₂.
    pub delta: f64,
}

impl DerivedConstants {
    /// Zero-coupling limit used when k₁ = k₂ = 0 is requested explicitly
    /// (sweeps of the uncoupled system): the formulas above are 0/0 there,
    /// so the modes fall back to their bare frequencies with no mixing.
    pub fn uncoupled_limit(p: &EffectiveModelParams) -> Self {
        Self {
            omega_eff: p.omega1,
            k_eff: 0.0,
            omega_prime: p.omega2,
            c2: 0.0,
            delta: p.omega1 - p.omega2,
        }
    }
}

/// Evaluate the effective-model constants. Errors when k₁ = k₂ = 0.
pub fn derive_effective_constants(p: &EffectiveModelParams) -> Result<DerivedConstants> {
    let k_sq = p.k1 * p.k1 + p.k2 * p.k2;
    if k_sq == 0.0 {
        return Err(CoreError::DegenerateCoupling);
    }
    let k_eff = k_sq.sqrt();
    let delta = p.omega1 - p.omega2;
    Ok(DerivedConstants {
        omega_eff: (p.omega1 * p.k1 * p.k1 + p.omega2 * p.k2 * p.k2) / k_eff,
        k_eff,
        omega_prime: (p.omega1 * p.k2 * p.k2 + p.omega2 * p.k1 * p.k1) / k_eff,
        c2: delta * p.k1 * p.k2 / k_sq,
        delta,
    })
}

/// Full Hamiltonian
/// H = (ω/2)σ_z + ω₁a₁†a₁ + ω₂a₂†a₂
///   + [λ₁(a₁+a₁†) + λ₂(a₂+a₂†)]σ_x + J·a₁†a₁(a₂+a₂†).
pub fn build_full_hamiltonian(p: &FullModelParams, layout: &FockSpaceLayout) -> OperatorMatrix {
    let sz = hilbert::pauli(layout, PauliKind::Z);
    let sx = hilbert::pauli(layout, PauliKind::X);
    let n1 = hilbert::number(layout, Mode::One);
    let n2 = hilbert::number(layout, Mode::Two);
    let x1 = hilbert::annihilation(layout, Mode::One).plus_dagger();
    let x2 = hilbert::annihilation(layout, Mode::Two).plus_dagger();

    let free = sz
        .scale(real(0.5 * p.omega))
        .add(&n1.scale(real(p.omega1)))
        .add(&n2.scale(real(p.omega2)));
    let qubit_coupling = x1
        .scale(real(p.lambda1))
        .add(&x2.scale(real(p.lambda2)))
        .matmul(&sx);
    let radiation_pressure = n1.matmul(&x2).scale(real(p.j_coupling));

    let mut h = free.add(&qubit_coupling).add(&radiation_pressure);
    debug_assert!(h.hermiticity_defect() <= hilbert::HERMITIAN_TOL);
    h = OperatorMatrix::new_hermitian(h.entries().clone()).expect("full Hamiltonian Hermitian");
    h
}

/// System part of the effective Hamiltonian,
/// H_sys = (ω/2)σ_z + ω′α₂†α₂ + ω_eff[α₁†α₁ + k_eff(α₁+α₁†)σ_z]
///       + c₂[(α₁†α₂+α₁α₂†) + k_eff(α₂†+α₂)σ_z],
/// with the constants supplied explicitly (the zero-coupling route).
pub fn effective_system_hamiltonian(
    omega: f64,
    c: &DerivedConstants,
    layout: &FockSpaceLayout,
) -> OperatorMatrix {
    let sz = hilbert::pauli(layout, PauliKind::Z);
    let n1 = hilbert::number(layout, Mode::One);
    let n2 = hilbert::number(layout, Mode::Two);
    let x1 = hilbert::annihilation(layout, Mode::One).plus_dagger();
    let x2 = hilbert::annihilation(layout, Mode::Two).plus_dagger();
    let hop = normal_mode_hopping(layout);

    let privileged = n1.add(&x1.matmul(&sz).scale(real(c.k_eff)));
    let mixing = hop.add(&x2.matmul(&sz).scale(real(c.k_eff)));
    sz.scale(real(0.5 * omega))
        .add(&n2.scale(real(c.omega_prime)))
        .add(&privileged.scale(real(c.omega_eff)))
        .add(&mixing.scale(real(c.c2)))
}

/// Beam-splitter exchange α₁†α₂ + α₂†α₁ between the normal modes.
pub fn normal_mode_hopping(layout: &FockSpaceLayout) -> OperatorMatrix {
    let a1 = hilbert::annihilation(layout, Mode::One);
    let a2 = hilbert::annihilation(layout, Mode::Two);
    a1.dagger().matmul(&a2).plus_dagger()
}

/// Cubic mixing (α₁+α₂)†(α₁²−α₂²) + h.c. produced by the radiation
/// pressure in the normal-mode frame.
pub fn cubic_mixing(layout: &FockSpaceLayout) -> OperatorMatrix {
    let a1 = hilbert::annihilation(layout, Mode::One);
    let a2 = hilbert::annihilation(layout, Mode::Two);
    let sum_dag = a1.add(&a2).dagger();
    let diff_sq = a1.matmul(&a1).sub(&a2.matmul(&a2));
    sum_dag.matmul(&diff_sq).plus_dagger()
}

/// Interaction part of the effective Hamiltonian,
/// H_int = J[(α₁†α₂+α₂†α₁) + (α₁+α₂)†(α₁²−α₂²) + h.c.].
pub fn effective_interaction(j: f64, layout: &FockSpaceLayout) -> OperatorMatrix {
    normal_mode_hopping(layout)
        .add(&cubic_mixing(layout))
        .scale(real(j))
}

/// Effective Hamiltonian H = H_sys + H_int with constants supplied by the
/// caller. This is the explicit route that bypasses the degenerate-coupling
/// guard (e.g. for the k₁ = k₂ = 0 limit).
pub fn build_effective_hamiltonian_with_constants(
    p: &EffectiveModelParams,
    c: &DerivedConstants,
    layout: &FockSpaceLayout,
) -> OperatorMatrix {
    let h = effective_system_hamiltonian(p.omega, c, layout)
        .add(&effective_interaction(p.j_coupling, layout));
    OperatorMatrix::new_hermitian(h.entries().clone()).expect("effective Hamiltonian Hermitian")
}

/// Effective Hamiltonian H = H_sys + H_int (Eqs. of the two-frequency
/// coupled-resonator model), deriving the constants internally.
pub fn build_effective_hamiltonian(
    p: &EffectiveModelParams,
    layout: &FockSpaceLayout,
) -> Result<OperatorMatrix> {
    let c = derive_effective_constants(p)?;
    Ok(build_effective_hamiltonian_with_constants(p, &c, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::build_layout;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sorted_eigenvalues(h: &OperatorMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = h
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn derived_constants_symmetric_case() {
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.1, 0.0);
        let c = derive_effective_constants(&p).unwrap();
        let expected = 0.02f64.sqrt();
        assert_abs_diff_eq!(c.k_eff, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(c.omega_eff, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(c.omega_prime, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(c.delta, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn derived_constants_single_mode_limit() {
        let p = EffectiveModelParams {
            omega: 1.0,
            omega1: 1.3,
            omega2: 0.7,
            k1: 0.1,
            k2: 0.0,
            j_coupling: 0.0,
        };
        let c = derive_effective_constants(&p).unwrap();
        assert_abs_diff_eq!(c.k_eff, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.omega_eff, 0.1 * p.omega1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.omega_prime, 0.1 * p.omega2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_coupling_rejected() {
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.0, 0.1);
        assert!(matches!(
            derive_effective_constants(&p),
            Err(CoreError::DegenerateCoupling)
        ));
    }

    #[test]
    fn full_hamiltonian_uncoupled_ladder() {
        let layout = build_layout(3, 3).unwrap();
        let p = FullModelParams {
            omega: 1.0,
            omega1: 1.0,
            omega2: 1.0,
            lambda1: 0.0,
            lambda2: 0.0,
            j_coupling: 0.0,
        };
        let h = build_full_hamiltonian(&p, &layout);
        let eigs = sorted_eigenvalues(&h);
        let mut expected: Vec<f64> = Vec::new();
        for q in [-0.5, 0.5] {
            for m1 in 0..3 {
                for m2 in 0..3 {
                    expected.push(q + m1 as f64 + m2 as f64);
                }
            }
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigs.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn radiation_pressure_matrix_element() {
        // J = 0.1, everything else zero: <g,1,1|H|g,1,0> = J.
        let layout = build_layout(3, 3).unwrap();
        let p = FullModelParams {
            omega: 0.0,
            omega1: 0.0,
            omega2: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            j_coupling: 0.1,
        };
        let h = build_full_hamiltonian(&p, &layout).to_dense();
        let from = layout.index_of(0, 1, 0);
        let to = layout.index_of(0, 1, 1);
        assert_abs_diff_eq!(h[(to, from)].re, 0.1, epsilon = 1e-15);
        // no coupling out of the zero-photon sector
        let vac = layout.index_of(0, 0, 0);
        for r in 0..layout.total_dim() {
            assert_abs_diff_eq!(h[(r, vac)].norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_coupling_lowers_ground_state() {
        // Dense diagonalization at (2,4,4): second-order shifts push the
        // ground level below the bare -ω/2.
        let layout = build_layout(4, 4).unwrap();
        let p = FullModelParams {
            omega: 1.0,
            omega1: 1.0,
            omega2: 1.0,
            lambda1: 0.1,
            lambda2: 0.1,
            j_coupling: 0.1,
        };
        let h = build_full_hamiltonian(&p, &layout);
        let eigs = sorted_eigenvalues(&h);
        assert!(eigs[0] < -0.5, "ground energy {} not lowered", eigs[0]);
    }

    #[test]
    fn effective_uncoupled_limit_is_plain_ladder() {
        // Explicit zero-coupling constants: spectrum is the qubit ladder plus
        // two oscillators at omega_eff, omega_prime.
        let layout = build_layout(3, 3).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.3, 0.9, 0.0, 0.0);
        let c = DerivedConstants {
            omega_eff: 1.3,
            k_eff: 0.0,
            omega_prime: 0.9,
            c2: 0.0,
            delta: 0.4,
        };
        let h = build_effective_hamiltonian_with_constants(&p, &c, &layout);
        let eigs = sorted_eigenvalues(&h);
        let mut expected: Vec<f64> = Vec::new();
        for q in [-0.5, 0.5] {
            for m1 in 0..3 {
                for m2 in 0..3 {
                    expected.push(q + 1.3 * m1 as f64 + 0.9 * m2 as f64);
                }
            }
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigs.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn effective_hamiltonian_hermitian_in_strong_coupling() {
        let layout = build_layout(6, 6).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 1.0, 1.0);
        let h = build_effective_hamiltonian(&p, &layout).unwrap();
        assert!(h.hermiticity_defect() <= 1e-12);
        assert!(h.is_hermitian_hint());
    }

    #[test]
    fn beam_splitter_splitting_is_two_j() {
        // Hopping only (cubic disabled by composing terms directly), both
        // modes at frequency 1, J = 0.1: the single-excitation sector
        // {|1,0>, |0,1>} is an analytic 2x2 with splitting 2J.
        let layout = build_layout(2, 2).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.0, 0.0);
        let c = DerivedConstants {
            omega_eff: 1.0,
            k_eff: 0.0,
            omega_prime: 1.0,
            c2: 0.0,
            delta: 0.0,
        };
        let j = 0.1;
        let h = effective_system_hamiltonian(p.omega, &c, &layout)
            .add(&normal_mode_hopping(&layout).scale(real(j)));
        let h = h.to_dense();
        let i10 = layout.index_of(0, 1, 0);
        let i01 = layout.index_of(0, 0, 1);
        let block = nalgebra::DMatrix::from_row_slice(2, 2, &[
            h[(i10, i10)].re,
            h[(i10, i01)].re,
            h[(i01, i10)].re,
            h[(i01, i01)].re,
        ]);
        let eigs = block.symmetric_eigen().eigenvalues;
        let split = (eigs[0] - eigs[1]).abs();
        assert_abs_diff_eq!(split, 2.0 * j, epsilon = 1e-12);
    }

    #[test]
    fn c2_zero_decouples_mode_two_from_qubit_and_mode_one() {
        // With c2 = 0 and J = 0 the Hamiltonian is (qubit ⊗ mode1) ⊕ mode2:
        // its spectrum is the direct sum of subsystem spectra.
        let layout = build_layout(3, 4).unwrap();
        let p = EffectiveModelParams::symmetric(0.7, 1.0, 1.0, 0.0, 0.0);
        let c = DerivedConstants {
            omega_eff: 0.9,
            k_eff: 0.35,
            omega_prime: 0.6,
            c2: 0.0,
            delta: 0.0,
        };
        let h = build_effective_hamiltonian_with_constants(&p, &c, &layout);
        let eigs = sorted_eigenvalues(&h);

        // independent dense construction of the qubit+mode1 block
        let n1 = layout.n1();
        let dim_block = 2 * n1;
        let mut block = nalgebra::DMatrix::<Complex64>::zeros(dim_block, dim_block);
        for q in 0..2 {
            let sz = if q == 0 { -1.0 } else { 1.0 };
            for m in 0..n1 {
                let i = q * n1 + m;
                block[(i, i)] += real(0.5 * p.omega * sz + c.omega_eff * m as f64);
                if m + 1 < n1 {
                    let amp = real(c.omega_eff * c.k_eff * ((m + 1) as f64).sqrt() * sz);
                    block[(q * n1 + m + 1, i)] += amp;
                    block[(i, q * n1 + m + 1)] += amp;
                }
            }
        }
        let mut block_eigs: Vec<f64> = block.symmetric_eigen().eigenvalues.iter().copied().collect();
        block_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut expected: Vec<f64> = Vec::new();
        for e in &block_eigs {
            for m2 in 0..layout.n2() {
                expected.push(e + c.omega_prime * m2 as f64);
            }
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigs.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn constants_roundtrip_exactly(
            omega1 in 0.1f64..3.0,
            omega2 in 0.1f64..3.0,
            k1 in -1.5f64..1.5,
            k2 in -1.5f64..1.5,
        ) {
            prop_assume!(k1 * k1 + k2 * k2 > 1e-6);
            let p = EffectiveModelParams { omega: 1.0, omega1, omega2, k1, k2, j_coupling: 0.0 };
            let c = derive_effective_constants(&p).unwrap();
            // round-trip: omega_eff * k_eff recovers omega1*k1^2 + omega2*k2^2
            let lhs = c.omega_eff * c.k_eff;
            let rhs = omega1 * k1 * k1 + omega2 * k2 * k2;
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1.0));
            // c2 vanishes exactly when delta does
            if omega1 == omega2 {
                prop_assert_eq!(c.c2, 0.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn hamiltonians_hermitian_at_random_parameters(
            omega in 0.1f64..2.0,
            k in -1.0f64..1.0,
            j in -1.0f64..1.0,
            delta in -1.0f64..1.0,
        ) {
            let layout = build_layout(4, 3).unwrap();
            let full = FullModelParams {
                omega, omega1: 1.0 + delta, omega2: 1.0,
                lambda1: k, lambda2: -k, j_coupling: j,
            };
            prop_assert!(build_full_hamiltonian(&full, &layout).hermiticity_defect() <= 1e-12);
            let eff = EffectiveModelParams::symmetric(omega, 1.0 + delta, 1.0, k.abs().max(1e-3), j);
            let h = build_effective_hamiltonian(&eff, &layout).unwrap();
            prop_assert!(h.hermiticity_defect() <= 1e-12);
        }
    }
}
