//! The two-circuit free-energy minimizer.
//!
//! Circuit 1 fixes a classical distribution `p_i = |<i|U1|0>|^2` over basis
//! states, whose Shannon entropy is the entropy estimate. Circuit 2 rotates
//! each basis state and the ensemble energy is
//! `E = sum_{i: p_i > eps} p_i <i| U2† H U2 |i>`. The objective is
//! `F = E - T S` with `T = 1/beta`; its minimum over density matrices is the
//! Gibbs state, so every evaluated `F` sits above the exact free energy.
//!
//! Gradients are parameter-shift: each parameter feeds exactly one gate, and
//! the per-parameter shift rule lives on the circuit. For the energy-side
//! shifts the shifted objectives are evaluated through an algebraically
//! identical density-matrix form `E(shift) = tr(G rho_g G† M_g)`, where
//! `rho_g` is the ensemble density matrix propagated up to the shifted gate
//! and `M_g` the Hamiltonian pulled back through the gates after it; prefix
//! and suffix are shared across shifts, which is what makes the sweep cheap.
//! The entropy-side gradient is
//! `dF/dtheta1 = sum_i (E_i + T ln p_i) dp_i/dtheta1` (the `+T` term drops
//! because shifts preserve `sum_i p_i`).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::error::{Result, VqtError};
use crate::gate::{Gate, GateKind};
use crate::hubbard::{build_hamiltonian, HubbardConfig};
use crate::linalg::CMatrix;
use crate::optimize::{minimize, LbfgsOptions};
use crate::pauli::PauliSum;
use crate::rng::{make_rng, mix_seed};
use crate::statevector::{estimate_expectation_with_shots, sample_counts, ExpectationPlan, StateVector};
use crate::thermal::{exact_thermal, fidelity, reconstruct_density_matrix};

/// Largest register for which the dense gradient sweep is used; above this
/// the per-state parameter-shift path takes over.
const MATRIX_ROUTE_MAX_QUBITS: usize = 8;

/// Expectation mode: exact statevector values, or frozen-seed shot-noise
/// estimates (the same seed is reused per evaluation, so the objective stays
/// a deterministic function of the parameters).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Initialization of the joint parameter vector.
#[derive(Debug, Clone, Copy)]
pub enum InitStrategy {
    /// Central Gaussian, one standard deviation.
    Gaussian { seed: u64 },
    /// Uniform on [-pi, pi].
    Uniform { seed: u64 },
}

impl InitStrategy {
    pub fn draw(&self, n: usize) -> Vec<f64> {
        match *self {
            InitStrategy::Gaussian { seed } => {
                let mut rng = make_rng(seed);
                let dist = rand_distr::StandardNormal;
                (0..n).map(|_| rand_distr::Distribution::sample(&dist, &mut rng)).collect()
            }
            InitStrategy::Uniform { seed } => {
                let mut rng = make_rng(seed);
                (0..n)
                    .map(|_| {
                        rand_distr::Distribution::sample(
                            &rand_distr::Uniform::new_inclusive(
                                -std::f64::consts::PI,
                                std::f64::consts::PI,
                            )
                            .unwrap(),
                            &mut rng,
                        )
                    })
                    .collect()
            }
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            InitStrategy::Gaussian { seed } | InitStrategy::Uniform { seed } => seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QvqtProblem {
    pub hamiltonian: PauliSum,
    pub beta: f64,
    pub vqc1: Circuit,
    pub vqc2: Circuit,
    pub mode: Mode,
    pub prob_cutoff: f64,
}

impl QvqtProblem {
    pub fn new(
        hamiltonian: PauliSum,
        beta: f64,
        vqc1: Circuit,
        vqc2: Circuit,
        mode: Mode,
        prob_cutoff: f64,
    ) -> Result<Self> {
        if beta <= 0.0 {
            return Err(VqtError::InvalidConfig("beta must be positive".into()));
        }
        if !(0.0..=1e-3).contains(&prob_cutoff) {
            return Err(VqtError::InvalidConfig(
                "probability cutoff must lie in [0, 1e-3]".into(),
            ));
        }
        let w = hamiltonian.width();
        if vqc1.n_qubits() != w || vqc2.n_qubits() != w {
            return Err(VqtError::InvalidConfig(format!(
                "circuit widths ({}, {}) must match Hamiltonian width {w}",
                vqc1.n_qubits(),
                vqc2.n_qubits()
            )));
        }
        Ok(Self { hamiltonian, beta, vqc1, vqc2, mode, prob_cutoff })
    }

    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.width()
    }
}

/// Shannon entropy `-sum p ln p`; zero-probability outcomes contribute zero.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut total = 0.0f64;
    let mut sum = 0.0f64;
    for &pi in p {
        if pi < -1e-10 {
            return Err(VqtError::InvalidState(format!(
                "negative probability {pi:e}"
            )));
        }
        sum += pi;
        if pi > 0.0 {
            total -= pi * pi.ln();
        }
    }
    if (sum - 1.0).abs() > 1e-8 {
        return Err(VqtError::InvalidState(format!(
            "probabilities sum to {sum}, expected 1 within 1e-8"
        )));
    }
    Ok(total)
}

/// Distribution over basis states prepared by circuit 1: exact amplitudes
/// squared, or normalized empirical frequencies in shot mode.
pub fn ensemble_probabilities(vqc1: &Circuit, theta1: &[f64], mode: Mode) -> Result<Vec<f64>> {
    let exact = vqc1.state_from_zero(theta1)?.probabilities();
    match mode {
        Mode::Exact => Ok(exact),
        Mode::Shots { shots, seed } => {
            let counts = sample_counts(&exact, shots, mix_seed(seed, 0x7001));
            Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
        }
    }
}

/// One full objective evaluation.
#[derive(Debug, Clone)]
pub struct Breakdown {
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    /// Full distribution from circuit 1.
    pub p: Vec<f64>,
    /// Basis states above the probability cutoff, ascending label order.
    pub kept: Vec<usize>,
    /// Per-kept-state energies `<i|U2† H U2|i>`.
    pub energies: Vec<f64>,
    /// Probability mass discarded by the cutoff.
    pub tail_mass: f64,
}

/// Shared evaluation state for one problem: the compiled expectation plan,
/// and the dense Hamiltonian when the gradient sweep route applies.
pub struct Evaluator<'a> {
    problem: &'a QvqtProblem,
    plan: ExpectationPlan,
    dense_h: Option<CMatrix>,
    vqc2_gates_per_layer: Option<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a QvqtProblem) -> Result<Self> {
        let plan = ExpectationPlan::new(&problem.hamiltonian);
        let layers = problem.vqc2.layers();
        let n_gates = problem.vqc2.gates().len();
        let vqc2_gates_per_layer = if layers >= 1 && n_gates > 0 && n_gates % layers == 0 {
            Some(n_gates / layers)
        } else {
            None
        };
        let use_matrix = problem.mode == Mode::Exact
            && problem.n_qubits() <= MATRIX_ROUTE_MAX_QUBITS
            && vqc2_gates_per_layer.is_some();
        let dense_h = if use_matrix {
            Some(problem.hamiltonian.to_dense()?)
        } else {
            None
        };
        Ok(Self { problem, plan, dense_h, vqc2_gates_per_layer })
    }

    pub fn probabilities(&self, theta1: &[f64]) -> Result<Vec<f64>> {
        ensemble_probabilities(&self.problem.vqc1, theta1, self.problem.mode)
    }

    fn state_energy(&self, label: usize, theta2: &[f64]) -> Result<f64> {
        let mut st = StateVector::basis_state(self.problem.n_qubits(), label);
        self.problem.vqc2.apply_to(&mut st, theta2)?;
        match self.problem.mode {
            Mode::Exact => self.plan.expectation(&st),
            Mode::Shots { shots, seed } => estimate_expectation_with_shots(
                &st,
                &self.problem.hamiltonian,
                shots,
                mix_seed(seed, 0x9000_0000 + label as u64),
            ),
        }
    }

    /// Energies of the kept basis states, evaluated independently (and in
    /// parallel); results land in kept order so reductions stay fixed-order.
    fn energies(&self, kept: &[usize], theta2: &[f64]) -> Result<Vec<f64>> {
        kept.par_iter()
            .map(|&i| self.state_energy(i, theta2))
            .collect()
    }

    pub fn objective(&self, theta1: &[f64], theta2: &[f64]) -> Result<Breakdown> {
        let p = self.probabilities(theta1)?;
        let entropy = shannon_entropy(&p)?;
        let cutoff = self.problem.prob_cutoff;
        let kept: Vec<usize> = (0..p.len()).filter(|&i| p[i] > cutoff).collect();
        let tail_mass: f64 = (0..p.len())
            .filter(|&i| p[i] <= cutoff)
            .map(|i| p[i])
            .sum();
        let energies = self.energies(&kept, theta2)?;
        let energy: f64 = kept
            .iter()
            .zip(&energies)
            .map(|(&i, e)| p[i] * e)
            .sum();
        let free_energy = energy - entropy / self.problem.beta;
        if !free_energy.is_finite() {
            return Err(VqtError::Numerical(format!(
                "free energy is not finite at theta1={theta1:?} theta2={theta2:?}"
            )));
        }
        Ok(Breakdown { free_energy, energy, entropy, p, kept, energies, tail_mass })
    }

    /// Ensemble expectation `sum_i p_i <i|U2† op U2|i>` of an arbitrary
    /// observable at the given parameters (used for the number density).
    pub fn ensemble_expectation(&self, op: &PauliSum, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        if op.width() != self.problem.n_qubits() {
            return Err(VqtError::InvalidConfig("observable width mismatch".into()));
        }
        let p = self.probabilities(theta1)?;
        let plan = ExpectationPlan::new(op);
        let kept: Vec<usize> = (0..p.len())
            .filter(|&i| p[i] > self.problem.prob_cutoff)
            .collect();
        let vals: Vec<f64> = kept
            .par_iter()
            .map(|&i| {
                let mut st = StateVector::basis_state(self.problem.n_qubits(), i);
                self.problem.vqc2.apply_to(&mut st, theta2)?;
                plan.expectation(&st)
            })
            .collect::<Result<_>>()?;
        Ok(kept.iter().zip(&vals).map(|(&i, v)| p[i] * v).sum())
    }

    /// Parameter-shift gradient of F in both parameter sets.
    pub fn gradient(&self, theta1: &[f64], theta2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let bd = self.objective(theta1, theta2)?;
        self.gradient_with_breakdown(theta1, theta2, &bd)
    }

    fn gradient_with_breakdown(
        &self,
        theta1: &[f64],
        theta2: &[f64],
        bd: &Breakdown,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let g2 = if self.dense_h.is_some() {
            self.grad_theta2_sweep(theta2, bd)?
        } else {
            self.grad_theta2_per_state(theta2, bd)?
        };
        let g1 = self.grad_theta1(theta1, bd)?;
        Ok((g1, g2))
    }

    /// dF/dtheta1 via parameter shift of the distribution.
    fn grad_theta1(&self, theta1: &[f64], bd: &Breakdown) -> Result<Vec<f64>> {
        let t_inv = 1.0 / self.problem.beta;
        let weights: Vec<f64> = bd
            .kept
            .iter()
            .zip(&bd.energies)
            .map(|(&i, &e)| e + t_inv * bd.p[i].ln())
            .collect();
        (0..theta1.len())
            .into_par_iter()
            .map(|j| {
                let rule = self.problem.vqc1.shift_rule(j)?;
                let mut plus = theta1.to_vec();
                plus[j] += rule.shift;
                let mut minus = theta1.to_vec();
                minus[j] -= rule.shift;
                let pp = self.probabilities(&plus)?;
                let pm = self.probabilities(&minus)?;
                let mut g = 0.0f64;
                for (&i, w) in bd.kept.iter().zip(&weights) {
                    g += w * (pp[i] - pm[i]);
                }
                Ok(rule.coef * g)
            })
            .collect()
    }

    /// dF/dtheta2 by re-evaluating every kept state per shift. Exact but
    /// slow; the fallback when the dense sweep does not apply.
    fn grad_theta2_per_state(&self, theta2: &[f64], bd: &Breakdown) -> Result<Vec<f64>> {
        (0..theta2.len())
            .into_par_iter()
            .map(|j| {
                let rule = self.problem.vqc2.shift_rule(j)?;
                let mut acc = [0.0f64; 2];
                for (dir, slot) in [(1.0, 0), (-1.0, 1)] {
                    let mut shifted = theta2.to_vec();
                    shifted[j] += dir * rule.shift;
                    let mut e = 0.0f64;
                    for &i in &bd.kept {
                        e += bd.p[i] * self.state_energy(i, &shifted)?;
                    }
                    acc[slot] = e;
                }
                Ok(rule.coef * (acc[0] - acc[1]))
            })
            .collect()
    }

    /// dF/dtheta2 through the density-matrix sweep: propagate the ensemble
    /// density matrix forward gate by gate, pull the Hamiltonian backward,
    /// and evaluate every shifted energy as `tr(G rho G† M)`.
    fn grad_theta2_sweep(&self, theta2: &[f64], bd: &Breakdown) -> Result<Vec<f64>> {
        let h = self.dense_h.as_ref().unwrap();
        let per_layer = self.vqc2_gates_per_layer.unwrap();
        let circuit = &self.problem.vqc2;
        let gates = circuit.gates();
        let layers = circuit.layers();
        let dim = h.dim();

        // Observable at each layer boundary: m_after[k] = H pulled back
        // through layers k..L-1; m_after[L] = H.
        let mut m_after: Vec<CMatrix> = Vec::with_capacity(layers + 1);
        m_after.push(h.clone());
        let mut scratch = CMatrix::zeros(dim);
        for k in (0..layers).rev() {
            let mut m = m_after.last().unwrap().clone();
            for g in gates[k * per_layer..(k + 1) * per_layer].iter().rev() {
                conj_dagger(g, theta2, &mut m, &mut scratch);
            }
            m_after.push(m);
        }
        m_after.reverse(); // index k = boundary before layer k

        // Ensemble density matrix of the kept, p-weighted basis states.
        let mut rho = CMatrix::zeros(dim);
        for &i in &bd.kept {
            rho[(i, i)] = Complex64::new(bd.p[i], 0.0);
        }

        let mut grad = vec![0.0f64; theta2.len()];
        let mut shifted = theta2.to_vec();
        let mut trial = CMatrix::zeros(dim);
        for k in 0..layers {
            let layer_gates = &gates[k * per_layer..(k + 1) * per_layer];
            // Per-gate suffix observables inside layer k.
            let mut in_m: Vec<CMatrix> = vec![CMatrix::zeros(0); layer_gates.len()];
            let mut m = m_after[k + 1].clone();
            for (o, g) in layer_gates.iter().enumerate().rev() {
                in_m[o] = m.clone();
                if o > 0 {
                    conj_dagger(g, theta2, &mut m, &mut scratch);
                }
            }
            for (o, g) in layer_gates.iter().enumerate() {
                if let Some(expr) = &g.angle {
                    for &pid in &expr.params {
                        let rule = circuit.shift_rule(pid as usize)?;
                        let mut e_pm = [0.0f64; 2];
                        for (dir, slot) in [(1.0, 0), (-1.0, 1)] {
                            shifted[pid as usize] = theta2[pid as usize] + dir * rule.shift;
                            let angle = g.resolve_angle(&shifted);
                            e_pm[slot] = conj_trace(g, angle, &rho, &in_m[o], &mut trial, &mut scratch);
                            shifted[pid as usize] = theta2[pid as usize];
                        }
                        grad[pid as usize] = rule.coef * (e_pm[0] - e_pm[1]);
                    }
                }
                conj_forward(g, theta2, &mut rho, &mut scratch);
            }
        }
        Ok(grad)
    }

    /// Central finite differences of F over the joint parameter vector.
    pub fn gradient_fd(
        &self,
        theta1: &[f64],
        theta2: &[f64],
        step: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = |t1: &[f64], t2: &[f64]| -> Result<f64> {
            Ok(self.objective(t1, t2)?.free_energy)
        };
        let mut g1 = vec![0.0; theta1.len()];
        for j in 0..theta1.len() {
            let mut plus = theta1.to_vec();
            plus[j] += step;
            let mut minus = theta1.to_vec();
            minus[j] -= step;
            g1[j] = (f(&plus, theta2)? - f(&minus, theta2)?) / (2.0 * step);
        }
        let mut g2 = vec![0.0; theta2.len()];
        for j in 0..theta2.len() {
            let mut plus = theta2.to_vec();
            plus[j] += step;
            let mut minus = theta2.to_vec();
            minus[j] -= step;
            g2[j] = (f(theta1, &plus)? - f(theta1, &minus)?) / (2.0 * step);
        }
        Ok((g1, g2))
    }
}

// ---- dense gate kernels for the sweep route ----

fn small_matrix(g: &Gate, angle: f64) -> ([Complex64; 16], usize, Option<usize>, bool) {
    if g.kind.is_two_qubit() {
        (Gate::matrix2(g.kind, angle), g.q0, g.q1, true)
    } else {
        let m1 = Gate::matrix1(g.kind, angle);
        let mut m = [Complex64::new(0.0, 0.0); 16];
        m[..4].copy_from_slice(&m1);
        (m, g.q0, None, false)
    }
}

fn adjoint_small(m: &[Complex64; 16], two: bool) -> [Complex64; 16] {
    let n = if two { 4 } else { 2 };
    let mut out = [Complex64::new(0.0, 0.0); 16];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = m[c * n + r].conj();
        }
    }
    out
}

fn group_rows(dim: usize, abit: usize, bbit: Option<usize>) -> impl Iterator<Item = usize> {
    let mask = abit | bbit.unwrap_or(0);
    (0..dim).filter(move |r| r & mask == 0)
}

/// dst = G_big * src (rows pass).
fn apply_rows(m: &[Complex64; 16], q0: usize, q1: Option<usize>, src: &CMatrix, dst: &mut CMatrix) {
    let dim = src.dim();
    let abit = 1usize << q0;
    let s = src.data();
    let d = dst.data_mut();
    match q1 {
        None => {
            for base in group_rows(dim, abit, None) {
                let (r0, r1) = (base, base | abit);
                for c in 0..dim {
                    let v0 = s[r0 * dim + c];
                    let v1 = s[r1 * dim + c];
                    d[r0 * dim + c] = m[0] * v0 + m[1] * v1;
                    d[r1 * dim + c] = m[2] * v0 + m[3] * v1;
                }
            }
        }
        Some(q1) => {
            let bbit = 1usize << q1;
            for base in group_rows(dim, abit, Some(bbit)) {
                let rows = [base, base | abit, base | bbit, base | abit | bbit];
                for c in 0..dim {
                    let v = [
                        s[rows[0] * dim + c],
                        s[rows[1] * dim + c],
                        s[rows[2] * dim + c],
                        s[rows[3] * dim + c],
                    ];
                    for (l, &row) in rows.iter().enumerate() {
                        d[row * dim + c] = m[l * 4] * v[0]
                            + m[l * 4 + 1] * v[1]
                            + m[l * 4 + 2] * v[2]
                            + m[l * 4 + 3] * v[3];
                    }
                }
            }
        }
    }
}

/// dst = src * G_big† (columns pass).
fn apply_cols_dagger(
    m: &[Complex64; 16],
    q0: usize,
    q1: Option<usize>,
    src: &CMatrix,
    dst: &mut CMatrix,
) {
    let dim = src.dim();
    let abit = 1usize << q0;
    let s = src.data();
    let d = dst.data_mut();
    match q1 {
        None => {
            for r in 0..dim {
                let off = r * dim;
                for base in group_rows(dim, abit, None) {
                    let (c0, c1) = (base, base | abit);
                    let v0 = s[off + c0];
                    let v1 = s[off + c1];
                    d[off + c0] = m[0].conj() * v0 + m[1].conj() * v1;
                    d[off + c1] = m[2].conj() * v0 + m[3].conj() * v1;
                }
            }
        }
        Some(q1) => {
            let bbit = 1usize << q1;
            for r in 0..dim {
                let off = r * dim;
                for base in group_rows(dim, abit, Some(bbit)) {
                    let cols = [base, base | abit, base | bbit, base | abit | bbit];
                    let v = [s[off + cols[0]], s[off + cols[1]], s[off + cols[2]], s[off + cols[3]]];
                    for (l, &col) in cols.iter().enumerate() {
                        d[off + col] = m[l * 4].conj() * v[0]
                            + m[l * 4 + 1].conj() * v[1]
                            + m[l * 4 + 2].conj() * v[2]
                            + m[l * 4 + 3].conj() * v[3];
                    }
                }
            }
        }
    }
}

/// Diagonal of a diagonal gate as a full phase vector over basis labels, or
/// None when the gate mixes basis states. Diagonal gates (RZ, S, merged ZZ
/// exponentials) make up over half the ansatz; their conjugations collapse
/// to entrywise phase passes.
fn diagonal_phases(g: &Gate, angle: f64, dim: usize) -> Option<Vec<Complex64>> {
    match g.kind {
        GateKind::RZ | GateKind::S => {
            let m = Gate::matrix1(g.kind, angle);
            let (d0, d1) = (m[0], m[3]);
            let bit = 1usize << g.q0;
            Some((0..dim).map(|r| if r & bit == 0 { d0 } else { d1 }).collect())
        }
        GateKind::ExpZZ => {
            let (sn, cs) = angle.sin_cos();
            let plus = Complex64::new(cs, sn);
            let minus = Complex64::new(cs, -sn);
            let (ab, bb) = (1usize << g.q0, 1usize << g.q1.unwrap());
            Some(
                (0..dim)
                    .map(|r| {
                        let parity = ((r & ab != 0) as u8) ^ ((r & bb != 0) as u8);
                        if parity == 0 {
                            plus
                        } else {
                            minus
                        }
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

/// rho <- G rho G† at the gate's unshifted angle.
fn conj_forward(g: &Gate, theta: &[f64], rho: &mut CMatrix, scratch: &mut CMatrix) {
    let angle = g.resolve_angle(theta);
    let dim = rho.dim();
    if let Some(ph) = diagonal_phases(g, angle, dim) {
        let data = rho.data_mut();
        for r in 0..dim {
            let pr = ph[r];
            for c in 0..dim {
                data[r * dim + c] *= pr * ph[c].conj();
            }
        }
        return;
    }
    let (m, q0, q1, _two) = small_matrix(g, angle);
    apply_rows(&m, q0, q1, rho, scratch);
    apply_cols_dagger(&m, q0, q1, scratch, rho);
}

/// m_obs <- G† m_obs G (pull an observable backward through a gate).
fn conj_dagger(g: &Gate, theta: &[f64], m_obs: &mut CMatrix, scratch: &mut CMatrix) {
    let angle = g.resolve_angle(theta);
    let dim = m_obs.dim();
    if let Some(ph) = diagonal_phases(g, angle, dim) {
        let data = m_obs.data_mut();
        for r in 0..dim {
            let pr = ph[r].conj();
            for c in 0..dim {
                data[r * dim + c] *= pr * ph[c];
            }
        }
        return;
    }
    let (m, q0, q1, two) = small_matrix(g, angle);
    let md = adjoint_small(&m, two);
    apply_rows(&md, q0, q1, m_obs, scratch);
    apply_cols_dagger(&md, q0, q1, scratch, m_obs);
}

/// Re tr( (G rho G†) M ) with G at an explicit angle.
fn conj_trace(
    g: &Gate,
    angle: f64,
    rho: &CMatrix,
    m_obs: &CMatrix,
    t1: &mut CMatrix,
    t2: &mut CMatrix,
) -> f64 {
    let dim = rho.dim();
    if let Some(ph) = diagonal_phases(g, angle, dim) {
        let a = rho.data();
        let b = m_obs.data();
        let mut total = 0.0f64;
        for r in 0..dim {
            let pr = ph[r];
            for c in 0..dim {
                let x = a[r * dim + c] * pr * ph[c].conj();
                let y = b[c * dim + r];
                total += x.re * y.re - x.im * y.im;
            }
        }
        return total;
    }
    let (m, q0, q1, _two) = small_matrix(g, angle);
    apply_rows(&m, q0, q1, rho, t1);
    apply_cols_dagger(&m, q0, q1, t1, t2);
    let a = t2.data();
    let b = m_obs.data();
    let mut total = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            let x = a[r * dim + c];
            let y = b[c * dim + r];
            total += x.re * y.re - x.im * y.im;
        }
    }
    total
}

// ---- public free functions mirroring the operation contracts ----

/// `E = sum_{p_i > eps} p_i E_i` and the discarded tail mass.
pub fn ensemble_energy(problem: &QvqtProblem, theta1: &[f64], theta2: &[f64]) -> Result<(f64, f64)> {
    let ev = Evaluator::new(problem)?;
    let bd = ev.objective(theta1, theta2)?;
    Ok((bd.energy, bd.tail_mass))
}

pub fn free_energy(problem: &QvqtProblem, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
    Ok(Evaluator::new(problem)?.objective(theta1, theta2)?.free_energy)
}

pub fn gradient(problem: &QvqtProblem, theta1: &[f64], theta2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Evaluator::new(problem)?.gradient(theta1, theta2)
}

pub fn gradient_fd(
    problem: &QvqtProblem,
    theta1: &[f64],
    theta2: &[f64],
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Evaluator::new(problem)?.gradient_fd(theta1, theta2, step)
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// L-BFGS iteration budget.
    pub budget: usize,
    pub f_tol: f64,
    pub grad_tol: f64,
    /// Fill `QvqtResult::fidelity` against the ED reference when the
    /// register is small enough (<= 12 qubits).
    pub compute_fidelity: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { budget: 400, f_tol: 1e-8, grad_tol: 1e-6, compute_fidelity: true }
    }
}

/// Final state of one optimization run.
#[derive(Debug, Clone)]
pub struct QvqtResult {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub p: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub fidelity: Option<f64>,
    pub layers1: usize,
    pub layers2: usize,
    pub tail_mass: f64,
}

/// Draw initial parameters and minimize.
pub fn optimize(problem: &QvqtProblem, init: InitStrategy, opts: &OptimizeOptions) -> Result<QvqtResult> {
    let n1 = problem.vqc1.n_params();
    let n2 = problem.vqc2.n_params();
    let theta = init.draw(n1 + n2);
    optimize_with_start(problem, &theta[..n1], &theta[n1..], opts)
}

/// Minimize starting from explicit parameter values.
pub fn optimize_with_start(
    problem: &QvqtProblem,
    theta1_0: &[f64],
    theta2_0: &[f64],
    opts: &OptimizeOptions,
) -> Result<QvqtResult> {
    let ev = Evaluator::new(problem)?;
    let n1 = theta1_0.len();
    let mut x0 = theta1_0.to_vec();
    x0.extend_from_slice(theta2_0);

    let lbfgs = LbfgsOptions {
        max_iters: opts.budget.max(1),
        f_tol: opts.f_tol,
        grad_tol: opts.grad_tol,
        ..Default::default()
    };
    let outcome = minimize(
        |x| Ok(ev.objective(&x[..n1], &x[n1..])?.free_energy),
        |x| {
            let bd = ev.objective(&x[..n1], &x[n1..])?;
            let (g1, g2) = ev.gradient_with_breakdown(&x[..n1], &x[n1..], &bd)?;
            let mut g = g1;
            g.extend(g2);
            Ok((bd.free_energy, g))
        },
        &x0,
        &lbfgs,
    )?;

    let theta1 = outcome.x[..n1].to_vec();
    let theta2 = outcome.x[n1..].to_vec();
    let bd = ev.objective(&theta1, &theta2)?;

    let fidelity_value = if opts.compute_fidelity && problem.n_qubits() <= 12 {
        Some(result_fidelity(problem, &theta2, &bd)?)
    } else {
        None
    };

    Ok(QvqtResult {
        theta1,
        theta2,
        free_energy: bd.free_energy,
        energy: bd.energy,
        entropy: bd.entropy,
        p: bd.p,
        iterations: outcome.iterations,
        converged: outcome.converged,
        fidelity: fidelity_value,
        layers1: problem.vqc1.layers(),
        layers2: problem.vqc2.layers(),
        tail_mass: bd.tail_mass,
    })
}

/// Fidelity of the reconstructed density matrix against the exact Gibbs
/// state of the problem Hamiltonian.
pub fn result_fidelity(problem: &QvqtProblem, theta2: &[f64], bd: &Breakdown) -> Result<f64> {
    let h = problem.hamiltonian.to_dense_with_cap(12)?;
    let exact = exact_thermal(&h, problem.beta)?;
    let v = problem.vqc2.unitary(theta2)?;
    let rho_rec = reconstruct_density_matrix(&bd.p, &v)?;
    fidelity(&exact.rho, &rho_rec)
}

/// The wire-format result record: one solved (beta, U, mu) point with its
/// configuration echo, serialized to JSON by the harness.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResultRecord {
    pub beta: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub mu: f64,
    pub t: f64,
    pub n_sites: usize,
    pub boundary: String,
    #[serde(rename = "F")]
    pub free_energy: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "S")]
    pub entropy: f64,
    pub number_density: f64,
    pub fidelity: Option<f64>,
    pub layers1: usize,
    pub layers2: usize,
    pub iterations: usize,
    pub seed: u64,
    pub mode: String,
    pub shots: Option<u64>,
}

impl ResultRecord {
    pub fn new(
        config: &HubbardConfig,
        beta: f64,
        result: &QvqtResult,
        number_density: f64,
        seed: u64,
        mode: Mode,
    ) -> Self {
        let (mode_name, shots) = match mode {
            Mode::Exact => ("exact".to_string(), None),
            Mode::Shots { shots, .. } => ("shots".to_string(), Some(shots)),
        };
        Self {
            beta,
            u: config.u,
            mu: config.mu,
            t: config.t,
            n_sites: config.n_sites,
            boundary: config.boundary.to_string(),
            free_energy: result.free_energy,
            energy: result.energy,
            entropy: result.entropy,
            number_density,
            fidelity: result.fidelity,
            layers1: result.layers1,
            layers2: result.layers2,
            iterations: result.iterations,
            seed,
            mode: mode_name,
            shots,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveOptions {
    pub fidelity_target: f64,
    pub max_layers: usize,
    pub merge_zz: bool,
    pub mode: Mode,
    pub prob_cutoff: f64,
    pub opt: OptimizeOptions,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            fidelity_target: 0.90,
            max_layers: 5,
            merge_zz: true,
            mode: Mode::Exact,
            prob_cutoff: 1e-12,
            opt: OptimizeOptions::default(),
        }
    }
}

/// Layer-adaptive protocol: start at one layer per circuit, optimize, and
/// while the fidelity misses the target grow the circuit whose error
/// dominates - VQC2 when the relative energy error exceeds the relative
/// entropy error, VQC1 otherwise. New layers start at zero (identity for
/// VQC2; for VQC1 the fresh CNOT ring still acts); converged parameters are
/// kept. Reported iterations are the total across stages.
pub fn adaptive_layer_solve(
    config: &HubbardConfig,
    beta: f64,
    init: InitStrategy,
    opts: &AdaptiveOptions,
) -> Result<QvqtResult> {
    let hamiltonian = build_hamiltonian(config)?;
    if hamiltonian.width() > 12 {
        return Err(VqtError::ResourceLimit(
            "adaptive protocol needs the ED reference (<= 12 qubits)".into(),
        ));
    }
    let h_dense = hamiltonian.to_dense_with_cap(12)?;
    let exact = exact_thermal(&h_dense, beta)?;

    let n_qubits = config.n_qubits();
    let mut l1 = 1usize;
    let mut l2 = 1usize;
    let seed_draw = init.draw(
        crate::ansatz::build_vqc1(n_qubits, 1, 1)?.n_params()
            + crate::ansatz::build_vqc2(config, 1, opts.merge_zz)?.n_params(),
    );
    let n1_first = crate::ansatz::build_vqc1(n_qubits, 1, 1)?.n_params();
    let mut theta1 = seed_draw[..n1_first].to_vec();
    let mut theta2 = seed_draw[n1_first..].to_vec();

    let mut total_iterations = 0usize;
    loop {
        let vqc1 = crate::ansatz::build_vqc1(n_qubits, l1, 1)?;
        let vqc2 = crate::ansatz::build_vqc2(config, l2, opts.merge_zz)?;
        theta1.resize(vqc1.n_params(), 0.0);
        theta2.resize(vqc2.n_params(), 0.0);
        let problem = QvqtProblem::new(
            hamiltonian.clone(),
            beta,
            vqc1,
            vqc2,
            opts.mode,
            opts.prob_cutoff,
        )?;
        let mut opt = opts.opt.clone();
        opt.compute_fidelity = true;
        let mut result = optimize_with_start(&problem, &theta1, &theta2, &opt)?;
        total_iterations += result.iterations;

        let fid = result
            .fidelity
            .ok_or_else(|| VqtError::Numerical("adaptive solve requires fidelity".into()))?;
        if fid >= opts.fidelity_target || (l1 >= opts.max_layers && l2 >= opts.max_layers) {
            result.iterations = total_iterations;
            return Ok(result);
        }

        let e_err = (result.energy - exact.energy).abs() / exact.energy.abs().max(1e-9);
        let s_err = (result.entropy - exact.entropy).abs() / exact.entropy.max(1e-9);
        let grow_vqc2 = if e_err >= s_err { l2 < opts.max_layers } else { l1 >= opts.max_layers };
        theta1 = result.theta1;
        theta2 = result.theta2;
        if grow_vqc2 {
            l2 += 1;
        } else {
            l1 += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_vqc1, build_vqc2};
    use crate::hubbard::Boundary;

    fn hubbard(n: usize, boundary: Boundary) -> HubbardConfig {
        HubbardConfig::new(n, 1.0, 0.8, 0.2, boundary).unwrap()
    }

    fn problem(n: usize, beta: f64, layers: usize) -> QvqtProblem {
        let cfg = hubbard(n, Boundary::Periodic);
        QvqtProblem::new(
            build_hamiltonian(&cfg).unwrap(),
            beta,
            build_vqc1(cfg.n_qubits(), layers, 1).unwrap(),
            build_vqc2(&cfg, layers, true).unwrap(),
            Mode::Exact,
            1e-12,
        )
        .unwrap()
    }

    fn random_point(p: &QvqtProblem, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let n1 = p.vqc1.n_params();
        let theta = InitStrategy::Uniform { seed }.draw(n1 + p.vqc2.n_params());
        (theta[..n1].to_vec(), theta[n1..].to_vec())
    }

    #[test]
    fn shannon_entropy_reference_values() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let uniform = vec![1.0 / 256.0; 256];
        assert!((shannon_entropy(&uniform).unwrap() - (256f64).ln()).abs() < 1e-12);
        let s = shannon_entropy(&[0.25, 0.75]).unwrap();
        assert!((s - 0.5623351446188083).abs() < 1e-12);
        assert!(shannon_entropy(&[-0.01, 1.01]).is_err());
    }

    #[test]
    fn zero_parameters_give_vacuum_energy() {
        let p = problem(2, 1.0, 1);
        let ev = Evaluator::new(&p).unwrap();
        let t1 = vec![0.0; p.vqc1.n_params()];
        let t2 = vec![0.0; p.vqc2.n_params()];
        let bd = ev.objective(&t1, &t2).unwrap();
        // vqc1 at zero fixes |0...0>; the vacuum has zero energy in this
        // convention (no particles, no interaction)
        assert!((bd.p[0] - 1.0).abs() < 1e-12);
        assert!(bd.entropy.abs() < 1e-12);
        assert!(bd.energy.abs() < 1e-12);
    }

    #[test]
    fn uniform_distribution_gives_trace_energy() {
        // Rot(0, pi/2, 0) per qubit makes |+>^n, which every CNOT fixes;
        // then E = tr(H)/2^n regardless of theta2.
        let p = problem(2, 1.0, 1);
        let ev = Evaluator::new(&p).unwrap();
        let nq = p.n_qubits();
        let mut t1 = vec![0.0; p.vqc1.n_params()];
        for q in 0..nq {
            t1[3 * q + 1] = std::f64::consts::FRAC_PI_2;
        }
        let (_, t2) = random_point(&p, 5);
        let bd = ev.objective(&t1, &t2).unwrap();
        let dim = 1 << nq;
        let trace = p.hamiltonian.to_dense().unwrap().trace().re / dim as f64;
        assert!((bd.energy - trace).abs() < 1e-10);
        assert!((bd.entropy - (dim as f64).ln()).abs() < 1e-10);
    }

    #[test]
    fn objective_is_bitwise_deterministic() {
        let p = problem(2, 1.0, 2);
        let ev = Evaluator::new(&p).unwrap();
        let (t1, t2) = random_point(&p, 9);
        let a = ev.objective(&t1, &t2).unwrap().free_energy;
        let b = ev.objective(&t1, &t2).unwrap().free_energy;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gibbs_variational_bound() {
        for beta in [0.5, 3.0] {
            let p = problem(2, beta, 1);
            let exact =
                exact_thermal(&p.hamiltonian.to_dense().unwrap(), beta).unwrap();
            let ev = Evaluator::new(&p).unwrap();
            for seed in 0..25 {
                let (t1, t2) = random_point(&p, 1000 + seed);
                let f = ev.objective(&t1, &t2).unwrap().free_energy;
                assert!(
                    f >= exact.free_energy - 1e-9,
                    "beta={beta} seed={seed}: F={f} < F_exact={}",
                    exact.free_energy
                );
            }
        }
    }

    #[test]
    fn sweep_and_per_state_gradients_agree() {
        let p = problem(2, 1.7, 2);
        let ev = Evaluator::new(&p).unwrap();
        assert!(ev.dense_h.is_some());
        let (t1, t2) = random_point(&p, 21);
        let bd = ev.objective(&t1, &t2).unwrap();
        let sweep = ev.grad_theta2_sweep(&t2, &bd).unwrap();
        let per_state = ev.grad_theta2_per_state(&t2, &bd).unwrap();
        for (a, b) in sweep.iter().zip(&per_state) {
            assert!((a - b).abs() < 1e-11, "sweep {a} vs per-state {b}");
        }
    }

    #[test]
    fn parameter_shift_matches_finite_differences() {
        for layers in [1usize, 2] {
            let p = problem(2, 1.3, layers);
            let ev = Evaluator::new(&p).unwrap();
            for seed in 0..3 {
                let (t1, t2) = random_point(&p, 40 + seed);
                let (g1, g2) = ev.gradient(&t1, &t2).unwrap();
                let (f1, f2) = ev.gradient_fd(&t1, &t2, 1e-5).unwrap();
                let worst = g1
                    .iter()
                    .zip(&f1)
                    .chain(g2.iter().zip(&f2))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(worst <= 1e-6, "L={layers} seed={seed}: deviation {worst}");
            }
        }
    }

    #[test]
    fn cutoff_changes_energy_negligibly() {
        let cfg = hubbard(2, Boundary::Periodic);
        let h = build_hamiltonian(&cfg).unwrap();
        let mk = |eps: f64| {
            QvqtProblem::new(
                h.clone(),
                1.0,
                build_vqc1(4, 1, 1).unwrap(),
                build_vqc2(&cfg, 1, true).unwrap(),
                Mode::Exact,
                eps,
            )
            .unwrap()
        };
        let p0 = mk(0.0);
        let p8 = mk(1e-8);
        let (t1, t2) = random_point(&p0, 63);
        let e0 = Evaluator::new(&p0).unwrap().objective(&t1, &t2).unwrap().energy;
        let e8 = Evaluator::new(&p8).unwrap().objective(&t1, &t2).unwrap().energy;
        assert!((e0 - e8).abs() <= 1e-6);
    }

    #[test]
    fn shot_mode_is_reproducible_and_close() {
        let cfg = hubbard(2, Boundary::Periodic);
        let h = build_hamiltonian(&cfg).unwrap();
        let mk = |mode: Mode| {
            QvqtProblem::new(
                h.clone(),
                1.0,
                build_vqc1(4, 1, 1).unwrap(),
                build_vqc2(&cfg, 1, true).unwrap(),
                mode,
                1e-12,
            )
            .unwrap()
        };
        let exact_p = mk(Mode::Exact);
        let shot_p = mk(Mode::Shots { shots: 3000, seed: 17 });
        let (t1, t2) = random_point(&exact_p, 71);
        let f_exact = free_energy(&exact_p, &t1, &t2).unwrap();
        let f_a = free_energy(&shot_p, &t1, &t2).unwrap();
        let f_b = free_energy(&shot_p, &t1, &t2).unwrap();
        assert_eq!(f_a.to_bits(), f_b.to_bits());
        // 3000 shots puts the estimate within a loose noise band
        assert!((f_a - f_exact).abs() < 0.5, "shot F={f_a} exact F={f_exact}");
    }

    #[test]
    fn optimize_single_site_reaches_high_fidelity() {
        let cfg = hubbard(1, Boundary::Open);
        let h = build_hamiltonian(&cfg).unwrap();
        let opts = OptimizeOptions { budget: 200, ..Default::default() };
        let mut best = 0.0f64;
        for seed in 0..3 {
            let p = QvqtProblem::new(
                h.clone(),
                1.0,
                build_vqc1(2, 2, 1).unwrap(),
                build_vqc2(&cfg, 2, true).unwrap(),
                Mode::Exact,
                1e-12,
            )
            .unwrap();
            let r = optimize(&p, InitStrategy::Gaussian { seed }, &opts).unwrap();
            best = best.max(r.fidelity.unwrap());
            if best >= 0.99 {
                break;
            }
        }
        assert!(best >= 0.99, "best fidelity {best}");
    }

    #[test]
    fn high_temperature_entropy_dominates() {
        // at beta = 0.01 the minimizer pushes S to its maximum 2N ln 2
        let p = problem(2, 0.01, 2);
        let opts = OptimizeOptions {
            budget: 300,
            compute_fidelity: false,
            ..Default::default()
        };
        let r = optimize(&p, InitStrategy::Gaussian { seed: 3 }, &opts).unwrap();
        let s_max = 4.0 * (2.0f64).ln();
        assert!(
            (r.entropy - s_max).abs() / s_max < 0.01,
            "S = {} vs max {s_max}",
            r.entropy
        );
    }

    #[test]
    fn adaptive_early_exit_and_termination() {
        // easy instance: one site, generous target -> exits at (1, 1)
        let cfg = hubbard(1, Boundary::Open);
        let opts = AdaptiveOptions {
            fidelity_target: 0.5,
            opt: OptimizeOptions { budget: 60, ..Default::default() },
            ..Default::default()
        };
        let r = adaptive_layer_solve(&cfg, 1.0, InitStrategy::Gaussian { seed: 11 }, &opts).unwrap();
        assert_eq!((r.layers1, r.layers2), (1, 1));
        assert!(r.fidelity.unwrap() >= 0.5);

        // harder instance still terminates within the layer cap
        let cfg2 = hubbard(2, Boundary::Periodic);
        let opts2 = AdaptiveOptions {
            fidelity_target: 0.995,
            max_layers: 2,
            opt: OptimizeOptions { budget: 40, ..Default::default() },
            ..Default::default()
        };
        let r2 =
            adaptive_layer_solve(&cfg2, 5.0, InitStrategy::Gaussian { seed: 13 }, &opts2).unwrap();
        assert!(r2.layers1 <= 2 && r2.layers2 <= 2);
        assert!(r2.fidelity.is_some());
    }

    #[test]
    fn result_satisfies_free_energy_identity() {
        let p = problem(2, 2.0, 1);
        let opts = OptimizeOptions { budget: 50, compute_fidelity: false, ..Default::default() };
        let r = optimize(&p, InitStrategy::Gaussian { seed: 2 }, &opts).unwrap();
        assert!((r.free_energy - (r.energy - r.entropy / 2.0)).abs() < 1e-9);
        assert!(r.iterations <= 50);
    }
}
