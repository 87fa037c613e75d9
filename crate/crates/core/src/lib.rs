//! Variational preparation of thermal (Gibbs) states of the spin-1/2
//! repulsive Fermi-Hubbard model with chemical potential.
//!
//! The crate implements the two-circuit variational quantum thermalizer:
//! one circuit fixes a classical probability distribution over
//! computational basis states (the entropy side), a second rotates those
//! basis states (the energy side), and the Helmholtz free energy
//! `F = E - T*S` is minimized jointly over both parameter sets. Everything
//! runs on a dense statevector simulator; an exact-diagonalization
//! reference provides ground truth for free energy, entropy, number
//! density, and state fidelity.
//!
//! Module map:
//!
//! * [`pauli`] - weighted Pauli-string operators and dense matrices.
//! * [`hubbard`] - the Jordan-Wigner qubitized Hubbard Hamiltonian plus an
//!   independent fermionic brute-force oracle.
//! * [`linalg`] - dense complex matrices, Hermitian eigendecomposition,
//!   matrix exponential.
//! * [`gate`] / [`statevector`] - gate kernels and expectation values.
//! * [`circuit`] / [`ansatz`] - the two variational circuits, Pauli
//!   exponential compilation and CNOT/parameter cost accounting.
//! * [`thermal`] - exact thermal states, fidelity, reconstruction.
//! * [`optimize`] - L-BFGS minimizer with backtracking line search.
//! * [`engine`] - the free-energy objective, parameter-shift gradients,
//!   the optimization driver and the adaptive-layer protocol.
//! * [`diagnostics`] - objective-variance (barren plateau) and multi-seed
//!   optimization-error studies.

pub mod ansatz;
pub mod circuit;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod gate;
pub mod hubbard;
pub mod linalg;
pub mod optimize;
pub mod pauli;
pub mod rng;
pub mod statevector;
pub mod thermal;

pub use error::{Result, VqtError};
