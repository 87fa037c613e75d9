//! Dense statevector simulation: gate kernels, Pauli-sum expectation values,
//! computational-basis probabilities and multinomial shot sampling.
//!
//! Basis-state labels use qubit 0 as the least significant bit.

use num_complex::Complex64;
use rand::RngExt;

use crate::error::{Result, VqtError};
use crate::gate::{Gate, GateKind};
use crate::pauli::PauliSum;
use crate::rng::make_rng;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0>
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![C_ZERO; 1 << n_qubits];
        amps[0] = C_ONE;
        Self { n_qubits, amps }
    }

    /// Computational basis state |label>. Identical to applying X gates on
    /// the set bits of `label` to |0...0>.
    pub fn basis_state(n_qubits: usize, label: usize) -> Self {
        assert!(label < (1 << n_qubits));
        let mut amps = vec![C_ZERO; 1 << n_qubits];
        amps[label] = C_ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != (1 << n_qubits) {
            return Err(VqtError::InvalidConfig(format!(
                "amplitude vector length {} != 2^{n_qubits}",
                amps.len()
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Apply one gate; `theta` resolves any parameter references.
    pub fn apply(&mut self, gate: &Gate, theta: &[f64]) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let angle = gate.resolve_angle(theta);
        match gate.kind {
            GateKind::X => self.apply_x(gate.q0),
            GateKind::CNOT => self.apply_cnot(gate.q0, gate.q1.unwrap()),
            GateKind::ExpZZ => self.apply_exp_zz(gate.q0, gate.q1.unwrap(), angle),
            GateKind::ExpXX => self.apply_exp_xxyy(gate.q0, gate.q1.unwrap(), angle, false),
            GateKind::ExpYY => self.apply_exp_xxyy(gate.q0, gate.q1.unwrap(), angle, true),
            kind => self.apply_1q(gate.q0, &Gate::matrix1(kind, angle)),
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, m: &[Complex64; 4]) {
        let bit = 1usize << q;
        let dim = self.amps.len();
        let mut base = 0usize;
        while base < dim {
            for i0 in base..base + bit {
                let i1 = i0 | bit;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = m[0] * a0 + m[1] * a1;
                self.amps[i1] = m[2] * a0 + m[3] * a1;
            }
            base += bit << 1;
        }
    }

    fn apply_x(&mut self, q: usize) {
        let bit = 1usize << q;
        let dim = self.amps.len();
        let mut base = 0usize;
        while base < dim {
            for i0 in base..base + bit {
                self.amps.swap(i0, i0 | bit);
            }
            base += bit << 1;
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn apply_exp_zz(&mut self, a: usize, b: usize, theta: f64) {
        let (sn, cs) = theta.sin_cos();
        let plus = Complex64::new(cs, sn);
        let minus = Complex64::new(cs, -sn);
        let (ab, bb) = (1usize << a, 1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            let parity = ((i & ab != 0) as u8) ^ ((i & bb != 0) as u8);
            *amp *= if parity == 0 { plus } else { minus };
        }
    }

    /// exp(i theta XX) mixes |00>~|11> and |01>~|10> with +i sin; the YY
    /// version flips the sign on the equal-bit pair.
    fn apply_exp_xxyy(&mut self, a: usize, b: usize, theta: f64, yy: bool) {
        let (sn, cs) = theta.sin_cos();
        let c = Complex64::new(cs, 0.0);
        let s_eq = if yy {
            Complex64::new(0.0, -sn)
        } else {
            Complex64::new(0.0, sn)
        };
        let s_ne = Complex64::new(0.0, sn);
        let (ab, bb) = (1usize << a, 1usize << b);
        let both = ab | bb;
        for i in 0..self.amps.len() {
            if i & ab != 0 {
                continue; // visit each pair from its bit_a = 0 member
            }
            let j = i ^ both;
            let s = if i & bb == 0 { s_eq } else { s_ne };
            let (xi, xj) = (self.amps[i], self.amps[j]);
            self.amps[i] = c * xi + s * xj;
            self.amps[j] = c * xj + s * xi;
        }
    }

    /// p_i = |amplitude_i|^2
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// <psi| op |psi> for a Hermitian Pauli sum.
    pub fn expectation(&self, op: &PauliSum) -> Result<f64> {
        if op.width() != self.n_qubits {
            return Err(VqtError::InvalidConfig(format!(
                "operator width {} != state width {}",
                op.width(),
                self.n_qubits
            )));
        }
        ExpectationPlan::new(op).expectation(self)
    }
}

/// Precompiled evaluation plan for repeated expectation values of one
/// operator: all diagonal terms fold into a single real vector, off-diagonal
/// terms keep their masks and complex weight.
#[derive(Debug, Clone)]
pub struct ExpectationPlan {
    n_qubits: usize,
    diag: Vec<f64>,
    offdiag: Vec<OffdiagTerm>,
}

#[derive(Debug, Clone, Copy)]
struct OffdiagTerm {
    flip_mask: usize,
    sign_mask: usize,
    weight: Complex64, // coeff * i^{#Y}
}

impl ExpectationPlan {
    pub fn new(op: &PauliSum) -> Self {
        let n = op.width();
        let dim = 1usize << n;
        let mut diag = vec![0.0f64; dim];
        let mut offdiag = Vec::new();
        let mut any_diag = false;
        for (coeff, string) in op.terms() {
            let act = string.action();
            if act.flip_mask == 0 {
                any_diag = true;
                for (c, d) in diag.iter_mut().enumerate() {
                    if (c & act.sign_mask).count_ones() & 1 == 0 {
                        *d += coeff;
                    } else {
                        *d -= coeff;
                    }
                }
            } else {
                offdiag.push(OffdiagTerm {
                    flip_mask: act.flip_mask,
                    sign_mask: act.sign_mask,
                    weight: act.prefactor * coeff,
                });
            }
        }
        if !any_diag {
            diag.clear();
        }
        Self { n_qubits: n, diag, offdiag }
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        assert_eq!(state.n_qubits, self.n_qubits);
        let amps = &state.amps;
        let mut total = 0.0f64;
        if !self.diag.is_empty() {
            total += amps
                .iter()
                .zip(&self.diag)
                .map(|(a, d)| a.norm_sqr() * d)
                .sum::<f64>();
        }
        let mut resid = 0.0f64;
        for term in &self.offdiag {
            let mut acc = C_ZERO;
            for (c, amp) in amps.iter().enumerate() {
                let mut contrib = amps[c ^ term.flip_mask].conj() * amp;
                if (c & term.sign_mask).count_ones() & 1 == 1 {
                    contrib = -contrib;
                }
                acc += contrib;
            }
            let v = term.weight * acc;
            total += v.re;
            resid += v.im.abs();
        }
        if resid > 1e-10 * (1.0 + total.abs()) {
            return Err(VqtError::Numerical(format!(
                "expectation has imaginary residue {resid:e}; operator is not Hermitian"
            )));
        }
        Ok(total)
    }
}

/// Multinomial histogram over `p.len()` outcomes, drawn with the crate PRNG.
pub fn sample_counts(p: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut cum = Vec::with_capacity(p.len());
    let mut acc = 0.0f64;
    for &x in p {
        acc += x.max(0.0);
        cum.push(acc);
    }
    let total = acc;
    let mut rng = make_rng(seed);
    let mut counts = vec![0u64; p.len()];
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(p.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// Shot-based estimate of `<psi| op |psi>`.
///
/// Each Pauli term is measured independently: the state is rotated into the
/// term's eigenbasis (H for X, RZ(-pi/2) then H for Y, which equals H S† up
/// to a global phase), `shots` outcomes are drawn from the rotated
/// distribution, and the term estimate is the sampled mean of the +-1
/// parity eigenvalues. Identity terms contribute exactly.
pub fn estimate_expectation_with_shots(
    state: &StateVector,
    op: &PauliSum,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(VqtError::InvalidConfig("shots must be >= 1".into()));
    }
    let mut total = 0.0f64;
    for (term_idx, (coeff, string)) in op.terms().iter().enumerate() {
        if string.is_identity() {
            total += coeff;
            continue;
        }
        let mut rotated = state.clone();
        let mut support = 0usize;
        for &(q, p) in string.ops() {
            support |= 1 << q;
            match p {
                crate::pauli::Pauli::X => {
                    rotated.apply(&Gate::h(q), &[])?;
                }
                crate::pauli::Pauli::Y => {
                    rotated.apply(
                        &Gate::rz(q, crate::gate::AngleExpr::fixed(-std::f64::consts::FRAC_PI_2)),
                        &[],
                    )?;
                    rotated.apply(&Gate::h(q), &[])?;
                }
                crate::pauli::Pauli::Z => {}
            }
        }
        let probs = rotated.probabilities();
        let counts = sample_counts(&probs, shots, crate::rng::mix_seed(seed, term_idx as u64));
        let mut acc = 0i64;
        for (outcome, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let eig = if (outcome & support).count_ones() & 1 == 0 { 1i64 } else { -1 };
            acc += eig * n as i64;
        }
        total += coeff * acc as f64 / shots as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::AngleExpr;
    use crate::pauli::{Pauli, PauliString};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero_state(1);
        s.apply(&Gate::h(0), &[]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amps[0] - c(r, 0.0)).norm() < 1e-15);
        assert!((s.amps[1] - c(r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |q0=1, q1=0> is label 1; CNOT(0->1) maps it to label 3
        let mut s = StateVector::basis_state(2, 1);
        s.apply(&Gate::cnot(0, 1), &[]).unwrap();
        assert_eq!(s.amps[3], C_ONE);
        assert_eq!(s.amps[1], C_ZERO);
    }

    #[test]
    fn exp_zz_at_zero_is_identity() {
        let mut rng = make_rng(5);
        let amps: Vec<Complex64> = (0..8).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
        let mut s = StateVector::from_amplitudes(3, amps.clone()).unwrap();
        s.apply(&Gate::exp_zz(0, 2, AngleExpr::fixed(0.0)), &[]).unwrap();
        for (a, b) in s.amps.iter().zip(&amps) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn expectation_closed_forms() {
        let z = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())]).unwrap();
        let s0 = StateVector::zero_state(1);
        assert!((s0.expectation(&z).unwrap() - 1.0).abs() < 1e-14);

        let x = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::X).unwrap())]).unwrap();
        let mut plus = StateVector::zero_state(1);
        plus.apply(&Gate::h(0), &[]).unwrap();
        assert!((plus.expectation(&x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let mut rng = make_rng(17);
        let n = 4;
        let dim = 1 << n;
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let state = StateVector::from_amplitudes(n, amps.clone()).unwrap();

        let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
        let mut sum = PauliSum::zero(n);
        for _ in 0..5 {
            let mut ops = Vec::new();
            for q in 0..n {
                if rng.random::<f64>() < 0.6 {
                    ops.push((q, paulis[rng.random_range(0..3)]));
                }
            }
            let coeff = rng.random::<f64>() * 2.0 - 1.0;
            sum.push(coeff, PauliString::new(n, ops).unwrap()).unwrap();
        }
        sum.simplify();

        let fast = state.expectation(&sum).unwrap();
        let dense = sum.to_dense().unwrap();
        let mut slow = C_ZERO;
        for r in 0..dim {
            for cc in 0..dim {
                slow += amps[r].conj() * dense[(r, cc)] * amps[cc];
            }
        }
        assert!((fast - slow.re).abs() < 1e-10);
        assert!(slow.im.abs() < 1e-10);
    }

    #[test]
    fn norm_preserved_under_random_circuit() {
        let mut rng = make_rng(23);
        let n = 6;
        let mut s = StateVector::zero_state(n);
        for _ in 0..200 {
            let q0 = rng.random_range(0..n);
            let mut q1 = rng.random_range(0..n);
            while q1 == q0 {
                q1 = rng.random_range(0..n);
            }
            let angle = AngleExpr::fixed(rng.random::<f64>() * 6.0 - 3.0);
            let gate = match rng.random_range(0..8) {
                0 => Gate::h(q0),
                1 => Gate::s(q0),
                2 => Gate::x(q0),
                3 => Gate::rx(q0, angle),
                4 => Gate::ry(q0, angle),
                5 => Gate::rz(q0, angle),
                6 => Gate::cnot(q0, q1),
                _ => match rng.random_range(0..3) {
                    0 => Gate::exp_xx(q0, q1, angle),
                    1 => Gate::exp_yy(q0, q1, angle),
                    _ => Gate::exp_zz(q0, q1, angle),
                },
            };
            s.apply(&gate, &[]).unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut s = StateVector::zero_state(2);
        s.apply(&Gate::h(0), &[]).unwrap();
        s.apply(&Gate::h(1), &[]).unwrap();
        let p = s.probabilities();
        for &x in &p {
            assert!((x - 0.25).abs() < 1e-14);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_concentrated() {
        let counts = sample_counts(&[1.0, 0.0], 500, 11);
        assert_eq!(counts, vec![500, 0]);
        let a = sample_counts(&[0.3, 0.2, 0.5], 1000, 42);
        let b = sample_counts(&[0.3, 0.2, 0.5], 1000, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn shot_estimate_within_five_sigma() {
        let mut plus = StateVector::zero_state(1);
        plus.apply(&Gate::h(0), &[]).unwrap();
        let z = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())]).unwrap();
        let est = estimate_expectation_with_shots(&plus, &z, 3000, 7).unwrap();
        let sigma = 1.0 / (3000f64).sqrt();
        assert!(est.abs() < 5.0 * sigma, "estimate {est} vs 5 sigma {}", 5.0 * sigma);
    }

    #[test]
    fn shot_estimator_is_unbiased() {
        // <Z> on a tilted state; 100 independent 1000-shot estimates
        let mut s = StateVector::zero_state(1);
        s.apply(&Gate::ry(0, AngleExpr::fixed(0.9)), &[]).unwrap();
        let z = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())]).unwrap();
        let exact = s.expectation(&z).unwrap();
        let m = 100;
        let shots = 1000u64;
        let mean: f64 = (0..m)
            .map(|i| estimate_expectation_with_shots(&s, &z, shots, 1000 + i as u64).unwrap())
            .sum::<f64>()
            / m as f64;
        let var_one = (1.0 - exact * exact) / shots as f64;
        let se_mean = (var_one / m as f64).sqrt();
        assert!(
            (mean - exact).abs() < 4.0 * se_mean,
            "mean {mean} exact {exact} se {se_mean}"
        );
    }
}
