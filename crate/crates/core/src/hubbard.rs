//! The spin-1/2 repulsive Fermi-Hubbard Hamiltonian on a chain,
//!
//!   H = -t sum_{<i,j>,s} (c+_{i,s} c_{j,s} + h.c.)
//!       + U sum_i n_{i,up} n_{i,down} - mu sum_{i,s} n_{i,s},
//!
//! mapped to qubits by the Jordan-Wigner transformation and, independently,
//! built as a brute-force matrix directly on the occupation-number basis.
//! The two constructions share no code and serve as mutual ground truth.
//!
//! Conventions fixed here and used everywhere else:
//!
//! * Spin-major layout: qubits `[0, N)` are the spin-up sites in order,
//!   qubits `[N, 2N)` the spin-down sites.
//! * Occupation: qubit |1> = occupied mode, so `n = (1 - Z)/2`. Basis-state
//!   integer labels use qubit 0 as the least significant bit, which makes
//!   bit k of a label the occupation of mode k.
//! * With that layout, same-spin nearest-neighbour hopping carries no JW
//!   string; only the periodic wrap bond of each spin block keeps the
//!   interior `Z` chain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VqtError};
use crate::linalg::CMatrix;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::statevector::StateVector;

/// Chain boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Open => write!(f, "open"),
            Boundary::Periodic => write!(f, "periodic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// Physical and lattice parameters of one Hubbard instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubbardConfig {
    pub n_sites: usize,
    pub t: f64,
    pub u: f64,
    pub mu: f64,
    pub boundary: Boundary,
}

impl HubbardConfig {
    pub fn new(n_sites: usize, t: f64, u: f64, mu: f64, boundary: Boundary) -> Result<Self> {
        if n_sites == 0 {
            return Err(VqtError::InvalidConfig("n_sites must be >= 1".into()));
        }
        Ok(Self { n_sites, t, u, mu, boundary })
    }

    /// Two spin flavours: one qubit per (site, spin) mode.
    pub fn n_qubits(&self) -> usize {
        2 * self.n_sites
    }

    /// Qubit (= JW mode) index of a (site, spin) pair.
    pub fn mode(&self, site: usize, spin: Spin) -> usize {
        debug_assert!(site < self.n_sites);
        match spin {
            Spin::Up => site,
            Spin::Down => site + self.n_sites,
        }
    }

    /// Nearest-neighbour site pairs; the periodic wrap bond comes last.
    /// For two sites the periodic chain carries the (0,1) coupling twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut bonds: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && n >= 2 {
            bonds.push((n - 1, 0));
        }
        bonds
    }
}

/// Jordan-Wigner qubitization of the Hubbard Hamiltonian.
///
/// Per same-spin bond: `-t/2 (X_a Z.. X_b + Y_a Z.. Y_b)` with the Z chain
/// over the qubits strictly between `a` and `b` (empty for adjacent qubits,
/// the interior of the spin block for the periodic wrap bond). Per site:
/// `U/4 (Z_u Z_d - Z_u - Z_d + 1)`; per mode: `-mu/2 (1 - Z)`.
pub fn build_hamiltonian(config: &HubbardConfig) -> Result<PauliSum> {
    if config.n_sites == 1 && config.boundary == Boundary::Periodic {
        return Err(VqtError::InvalidConfig(
            "periodic boundary needs at least 2 sites (wrap bond would coincide with the only bond)"
                .into(),
        ));
    }
    let nq = config.n_qubits();
    let mut h = PauliSum::zero(nq);

    // Hopping.
    for spin in [Spin::Up, Spin::Down] {
        for &(i, j) in &config.bonds() {
            let a = config.mode(i.min(j), spin);
            let b = config.mode(i.max(j), spin);
            let chain: Vec<(usize, Pauli)> = (a + 1..b).map(|q| (q, Pauli::Z)).collect();
            for p in [Pauli::X, Pauli::Y] {
                let mut ops = vec![(a, p), (b, p)];
                ops.extend(chain.iter().cloned());
                h.push(-config.t / 2.0, PauliString::new(nq, ops)?)?;
            }
        }
    }

    // On-site repulsion: U n_up n_down = U/4 (1 - Z_u)(1 - Z_d).
    for i in 0..config.n_sites {
        let u_q = config.mode(i, Spin::Up);
        let d_q = config.mode(i, Spin::Down);
        h.push(
            config.u / 4.0,
            PauliString::new(nq, [(u_q, Pauli::Z), (d_q, Pauli::Z)])?,
        )?;
        h.push(-config.u / 4.0, PauliString::single(nq, u_q, Pauli::Z)?)?;
        h.push(-config.u / 4.0, PauliString::single(nq, d_q, Pauli::Z)?)?;
        h.push(config.u / 4.0, PauliString::identity(nq))?;
    }

    // Chemical potential: -mu n = -mu/2 (1 - Z) per mode.
    for q in 0..nq {
        h.push(-config.mu / 2.0, PauliString::identity(nq))?;
        h.push(config.mu / 2.0, PauliString::single(nq, q, Pauli::Z)?)?;
    }

    h.simplify();
    Ok(h)
}

/// Total number operator `n_total = sum_modes (1 - Z)/2` as a Pauli sum.
pub fn number_operator(config: &HubbardConfig) -> PauliSum {
    let nq = config.n_qubits();
    let mut n = PauliSum::zero(nq);
    n.push(config.n_sites as f64, PauliString::identity(nq)).unwrap();
    for q in 0..nq {
        n.push(-0.5, PauliString::single(nq, q, Pauli::Z).unwrap()).unwrap();
    }
    n.simplify();
    n
}

/// Number density `<n_total>/N` of a pure state. The number operator is
/// diagonal with eigenvalue `popcount(label)`, so this is a single pass.
pub fn number_density_state(state: &StateVector, config: &HubbardConfig) -> f64 {
    let total: f64 = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(c, a)| a.norm_sqr() * (c.count_ones() as f64))
        .sum();
    total / config.n_sites as f64
}

/// Number density `tr(rho n_total)/N` of a density matrix.
pub fn number_density_rho(rho: &CMatrix, config: &HubbardConfig) -> f64 {
    let total: f64 = (0..rho.dim())
        .map(|c| rho[(c, c)].re * (c.count_ones() as f64))
        .sum();
    total / config.n_sites as f64
}

/// Qubit cap for the brute-force fermionic construction.
pub const ORACLE_QUBIT_CAP: usize = 12;

fn jw_parity(state: usize, mode: usize) -> f64 {
    if (state & ((1usize << mode) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense matrix of `c+_mode` on `n_modes` fermionic modes, occupation basis,
/// with explicit (-1) parity signs. Test helper for anticommutators and a
/// building block of the oracle below.
pub fn creation_matrix(mode: usize, n_modes: usize) -> CMatrix {
    let dim = 1usize << n_modes;
    let mut m = CMatrix::zeros(dim);
    let bit = 1usize << mode;
    for s in 0..dim {
        if s & bit == 0 {
            m[(s | bit, s)] = Complex64::new(jw_parity(s, mode), 0.0);
        }
    }
    m
}

/// Dense matrix of `c_mode`.
pub fn annihilation_matrix(mode: usize, n_modes: usize) -> CMatrix {
    creation_matrix(mode, n_modes).adjoint()
}

/// Brute-force Hubbard Hamiltonian on the occupation-number basis.
///
/// Assembles the second-quantized Hamiltonian by acting with creation and
/// annihilation operators (explicit parity signs) on every basis state; no
/// Pauli algebra is involved. Ground truth for [`build_hamiltonian`].
pub fn fermionic_oracle_matrix(config: &HubbardConfig) -> Result<CMatrix> {
    if config.n_sites == 1 && config.boundary == Boundary::Periodic {
        return Err(VqtError::InvalidConfig(
            "periodic boundary needs at least 2 sites".into(),
        ));
    }
    let nq = config.n_qubits();
    if nq > ORACLE_QUBIT_CAP {
        return Err(VqtError::ResourceLimit(format!(
            "fermionic oracle capped at {ORACLE_QUBIT_CAP} qubits, requested {nq}"
        )));
    }
    let dim = 1usize << nq;
    let mut m = CMatrix::zeros(dim);

    // Directed hopping terms -t c+_p c_q for every bond, both directions.
    let mut hops: Vec<(usize, usize)> = Vec::new();
    for spin in [Spin::Up, Spin::Down] {
        for &(i, j) in &config.bonds() {
            let p = config.mode(i, spin);
            let q = config.mode(j, spin);
            hops.push((p, q));
            hops.push((q, p));
        }
    }

    for state in 0..dim {
        // Diagonal: U sum_i n_up n_down - mu sum n.
        let mut diag = -config.mu * state.count_ones() as f64;
        for i in 0..config.n_sites {
            let up = 1usize << config.mode(i, Spin::Up);
            let dn = 1usize << config.mode(i, Spin::Down);
            if state & up != 0 && state & dn != 0 {
                diag += config.u;
            }
        }
        m[(state, state)] += Complex64::new(diag, 0.0);

        // Hopping: apply c_q then c+_p.
        for &(p, q) in &hops {
            let (pb, qb) = (1usize << p, 1usize << q);
            if state & qb == 0 || state & pb != 0 {
                continue;
            }
            let mut sign = jw_parity(state, q);
            let mid = state & !qb;
            sign *= jw_parity(mid, p);
            let dst = mid | pb;
            m[(dst, state)] += Complex64::new(-config.t * sign, 0.0);
        }
    }
    Ok(m)
}
