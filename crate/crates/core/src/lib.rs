//! Simulator for a hybrid qubit + two-resonator optomechanical system.
//!
//! The library builds truncated Fock-space operators ([`hilbert`]), assembles
//! the full radiation-pressure Hamiltonian and its two-frequency effective
//! coupled-resonator counterpart ([`models`]), sweeps low-lying spectra over
//! the resonator detuning to locate avoided crossings ([`spectrum`]),
//! integrates Lindblad master-equation dynamics ([`dynamics`]) and extracts
//! second-order coherence functions and population imbalances
//! ([`observables`]).
//!
//! Conventions used throughout (all frequencies in units of the mechanical
//! mode frequency, `ħ = 1`):
//!
//! - tensor ordering is qubit ⊗ resonator-1 ⊗ resonator-2;
//! - the qubit ground state is basis index 0 with `σ_z|g⟩ = −|g⟩`;
//! - operators are immutable sparse matrices, safe to share across threads.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod observables;
pub mod sparse;
pub mod spectrum;

pub use error::CoreError;
pub use hilbert::{FockSpaceLayout, Mode, OperatorMatrix};
pub use sparse::CsrMatrix;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
