//! Weighted sums of Pauli strings.
//!
//! A [`PauliSum`] is the operator currency of the crate: the qubitized
//! Hubbard Hamiltonian, the number operator and every observable are sums
//! `H = sum_k c_k * P_k` with real coefficients and `P_k` a tensor product of
//! single-qubit X/Y/Z factors (identity elsewhere). Strings act on basis
//! states by a bit flip plus a phase, which keeps both expectation values and
//! dense-matrix construction at `O(2^n)` per term.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Result, VqtError};
use crate::linalg::CMatrix;

/// Coefficients below this magnitude are dropped during simplification.
pub const COEFF_EPS: f64 = 1e-12;

/// Default qubit cap for dense-matrix construction.
pub const DENSE_QUBIT_CAP: usize = 14;

/// Single-qubit Pauli factor. Identity is implied by absence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of Pauli factors on distinct qubits of a fixed-width
/// register. Factors are kept sorted by qubit index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    width: usize,
    ops: Vec<(usize, Pauli)>,
}

/// How a string acts on a computational basis state:
/// `P |c> = prefactor * (-1)^popcount(c & sign_mask) * |c ^ flip_mask>`.
#[derive(Debug, Clone, Copy)]
pub struct StringAction {
    pub flip_mask: usize,
    pub sign_mask: usize,
    pub prefactor: Complex64,
}

impl PauliString {
    /// Identity string on `width` qubits.
    pub fn identity(width: usize) -> Self {
        Self { width, ops: Vec::new() }
    }

    /// Build from (qubit, op) pairs; sorts by qubit, rejects duplicates and
    /// out-of-range indices.
    pub fn new(width: usize, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        let mut v: Vec<(usize, Pauli)> = ops.into_iter().collect();
        v.sort_by_key(|(q, _)| *q);
        for pair in v.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(VqtError::InvalidConfig(format!(
                    "duplicate qubit {} in Pauli string",
                    pair[0].0
                )));
            }
        }
        if let Some(&(q, _)) = v.last() {
            if q >= width {
                return Err(VqtError::InvalidConfig(format!(
                    "qubit {q} out of range for width {width}"
                )));
            }
        }
        Ok(Self { width, ops: v })
    }

    pub fn single(width: usize, qubit: usize, op: Pauli) -> Result<Self> {
        Self::new(width, [(qubit, op)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    /// Basis-state action masks and phase prefactor (`i^{#Y}`).
    pub fn action(&self) -> StringAction {
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut ny = 0u32;
        for &(q, p) in &self.ops {
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    sign |= 1 << q;
                    ny += 1;
                }
                Pauli::Z => sign |= 1 << q,
            }
        }
        let prefactor = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        StringAction { flip_mask: flip, sign_mask: sign, prefactor }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        let mut first = true;
        for &(q, p) in &self.ops {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", p.as_char(), q)?;
            first = false;
        }
        Ok(())
    }
}

/// A real-weighted sum of Pauli strings over a fixed-width register.
///
/// Kept simplified: terms sorted canonically, one entry per distinct string,
/// coefficients under [`COEFF_EPS`] removed. Real coefficients on Hermitian
/// strings make the whole sum Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    width: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(width: usize) -> Self {
        Self { width, terms: Vec::new() }
    }

    pub fn from_terms(width: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut sum = Self::zero(width);
        for (c, s) in terms {
            sum.push(c, s)?;
        }
        sum.simplify();
        Ok(sum)
    }

    /// Append a term without simplifying; callers run [`simplify`] when done.
    pub fn push(&mut self, coeff: f64, string: PauliString) -> Result<()> {
        if string.width() != self.width {
            return Err(VqtError::InvalidConfig(format!(
                "term width {} != sum width {}",
                string.width(),
                self.width
            )));
        }
        self.terms.push((coeff, string));
        Ok(())
    }

    /// Merge duplicate strings, drop near-zero coefficients, sort terms into
    /// canonical order. Idempotent.
    pub fn simplify(&mut self) {
        let mut map: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in self.terms.drain(..) {
            *map.entry(s).or_insert(0.0) += c;
        }
        self.terms = map
            .into_iter()
            .filter(|(_, c)| c.abs() >= COEFF_EPS)
            .map(|(s, c)| (c, s))
            .collect();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of a given string (0 when absent).
    pub fn coefficient(&self, string: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s == string)
            .map_or(0.0, |(c, _)| *c)
    }

    /// Sum of absolute coefficients; an upper bound on the spectral norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.width != other.width {
            return Err(VqtError::InvalidConfig("width mismatch in PauliSum add".into()));
        }
        let mut out = self.clone();
        for (c, s) in &other.terms {
            out.push(*c, s.clone())?;
        }
        out.simplify();
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let mut out = Self {
            width: self.width,
            terms: self
                .terms
                .iter()
                .map(|(c, s)| (c * factor, s.clone()))
                .collect(),
        };
        out.simplify();
        out
    }

    /// Dense Hermitian matrix `sum_k c_k P_k` with the default qubit cap.
    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_with_cap(DENSE_QUBIT_CAP)
    }

    pub fn to_dense_with_cap(&self, cap: usize) -> Result<CMatrix> {
        if self.width > cap {
            return Err(VqtError::ResourceLimit(format!(
                "dense matrix for {} qubits exceeds cap of {cap}",
                self.width
            )));
        }
        let dim = 1usize << self.width;
        let mut m = CMatrix::zeros(dim);
        for (coeff, string) in &self.terms {
            let act = string.action();
            for col in 0..dim {
                let row = col ^ act.flip_mask;
                let parity = (col & act.sign_mask).count_ones() & 1;
                let mut amp = act.prefactor * *coeff;
                if parity == 1 {
                    amp = -amp;
                }
                m[(row, col)] += amp;
            }
        }
        Ok(m)
    }

    /// Textual dump, one `<coefficient> <ops>` line per term, coefficients
    /// with 17 significant digits. Identity prints as `I`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (c, s) in &self.terms {
            let _ = writeln!(out, "{:.16e} {}", c, s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dense_single_z_is_diag() {
        let s = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())])
            .unwrap();
        let m = s.to_dense().unwrap();
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn dense_xx_is_antidiagonal() {
        let s = PauliSum::from_terms(
            2,
            [(
                0.5,
                PauliString::new(2, [(0, Pauli::X), (1, Pauli::X)]).unwrap(),
            )],
        )
        .unwrap();
        let m = s.to_dense().unwrap();
        for col in 0..4usize {
            for row in 0..4usize {
                let expect = if row == col ^ 0b11 { 0.5 } else { 0.0 };
                assert_eq!(m[(row, col)], c(expect, 0.0), "entry ({row},{col})");
            }
        }
    }

    #[test]
    fn dense_y_phases() {
        let s = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Y).unwrap())])
            .unwrap();
        let m = s.to_dense().unwrap();
        assert_eq!(m[(1, 0)], c(0.0, 1.0));
        assert_eq!(m[(0, 1)], c(0.0, -1.0));
    }

    #[test]
    fn simplify_merges_and_drops() {
        let zz = PauliString::new(2, [(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let mut s = PauliSum::zero(2);
        s.push(0.25, zz.clone()).unwrap();
        s.push(0.25, zz.clone()).unwrap();
        s.push(1e-15, PauliString::single(2, 0, Pauli::X).unwrap()).unwrap();
        s.simplify();
        assert_eq!(s.n_terms(), 1);
        assert!((s.coefficient(&zz) - 0.5).abs() < 1e-15);

        let before = s.clone();
        s.simplify();
        assert_eq!(s, before, "simplify must be idempotent");
    }

    #[test]
    fn duplicate_qubit_rejected() {
        assert!(PauliString::new(2, [(0, Pauli::X), (0, Pauli::Z)]).is_err());
        assert!(PauliString::new(2, [(3, Pauli::X)]).is_err());
    }

    #[test]
    fn dense_cap_enforced() {
        let s = PauliSum::zero(15);
        assert!(matches!(s.to_dense(), Err(VqtError::ResourceLimit(_))));
    }

    #[test]
    fn dump_format() {
        let s = PauliSum::from_terms(
            2,
            [
                (0.2, PauliString::new(2, [(0, Pauli::Z), (1, Pauli::Z)]).unwrap()),
                (0.1, PauliString::identity(2)),
            ],
        )
        .unwrap();
        let text = s.dump();
        assert!(text.contains("2.0000000000000001e-1 Z0 Z1"));
        assert!(text.contains("1.0000000000000001e-1 I"));
    }
}
