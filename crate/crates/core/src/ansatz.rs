//! The two variational circuits and their cost accounting.
//!
//! * VQC1 ("strongly entangling"): per layer, a general rotation
//!   `Rot = RZ RY RZ` with three fresh parameters on every qubit, then a
//!   ring of CNOTs `q -> (q + r) mod n`. It prepares the classical
//!   probability distribution over basis states.
//! * VQC2 (Hamiltonian ansatz): per layer a hopping block of
//!   `exp(i theta XX)` / `exp(i theta YY)` on every same-spin open-chain
//!   bond, then an on-site block of `exp(i theta ZZ)` on each (up,down)
//!   pair plus single-qubit `exp(i theta Z)` rotations. The two same-pair
//!   ZZ exponentials of a site commute; with `merge_zz` they are emitted as
//!   one gate whose angle reads the sum of both parameters, which brings the
//!   per-layer CNOT count of the compiled circuit to `2(5N - 4)`.
//!
//! Pauli exponentials compile to CNOT + RZ cores conjugated by basis-change
//! gates (H for XX, RX(pi/2) for YY); `cost_report` cross-checks the
//! closed-form CNOT counts `2LN` and `2L(5N-4)` against a walk of the
//! compiled gate list.

use crate::circuit::{AnsatzKind, Circuit};
use crate::error::{Result, VqtError};
use crate::gate::{AngleExpr, Gate, GateKind};
use crate::hubbard::{HubbardConfig, Spin};

/// Strongly entangling layers on `n_qubits` qubits.
pub fn build_vqc1(n_qubits: usize, layers: usize, entangler_range: usize) -> Result<Circuit> {
    if n_qubits < 2 {
        return Err(VqtError::InvalidConfig("vqc1 needs at least 2 qubits".into()));
    }
    if layers == 0 {
        return Err(VqtError::InvalidConfig("vqc1 needs at least 1 layer".into()));
    }
    if entangler_range % n_qubits == 0 {
        return Err(VqtError::InvalidConfig(
            "entangler range must not be 0 mod n_qubits (self-target)".into(),
        ));
    }
    let mut c = Circuit::new(n_qubits, AnsatzKind::Vqc1, layers);
    for _ in 0..layers {
        for q in 0..n_qubits {
            let a = c.add_param(0.0);
            let b = c.add_param(0.0);
            let g = c.add_param(0.0);
            c.push(Gate::rz(q, AngleExpr::param(a)))?;
            c.push(Gate::ry(q, AngleExpr::param(b)))?;
            c.push(Gate::rz(q, AngleExpr::param(g)))?;
        }
        for q in 0..n_qubits {
            c.push(Gate::cnot(q, (q + entangler_range) % n_qubits))?;
        }
    }
    Ok(c)
}

/// Hamiltonian-ansatz circuit for one Hubbard instance.
///
/// Hopping runs over open-chain bonds regardless of the Hamiltonian's
/// boundary; gate order is fixed (XX before YY per bond, bonds by site
/// index, spin-up block first) and parameters are allocated in the same
/// order whether or not ZZ merging is on.
pub fn build_vqc2(config: &HubbardConfig, layers: usize, merge_zz: bool) -> Result<Circuit> {
    if layers == 0 {
        return Err(VqtError::InvalidConfig("vqc2 needs at least 1 layer".into()));
    }
    let nq = config.n_qubits();
    let mut c = Circuit::new(nq, AnsatzKind::Vqc2, layers);
    for _ in 0..layers {
        for spin in [Spin::Up, Spin::Down] {
            for i in 0..config.n_sites.saturating_sub(1) {
                let a = config.mode(i, spin);
                let b = config.mode(i + 1, spin);
                let p_xx = c.add_param(0.0);
                c.push(Gate::exp_xx(a, b, AngleExpr::param(p_xx)))?;
                let p_yy = c.add_param(0.0);
                c.push(Gate::exp_yy(a, b, AngleExpr::param(p_yy)))?;
            }
        }
        for i in 0..config.n_sites {
            let up = config.mode(i, Spin::Up);
            let dn = config.mode(i, Spin::Down);
            let t0_up = c.add_param(0.0);
            let t1_up = c.add_param(0.0);
            let t0_dn = c.add_param(0.0);
            let t1_dn = c.add_param(0.0);
            if merge_zz {
                c.push(Gate::exp_zz(up, dn, AngleExpr::param_sum([t0_up, t0_dn])))?;
                // exp(i theta Z) == RZ(-2 theta) exactly (no global phase)
                c.push(Gate::rz(up, AngleExpr::scaled_param(t1_up, -2.0)))?;
                c.push(Gate::rz(dn, AngleExpr::scaled_param(t1_dn, -2.0)))?;
            } else {
                c.push(Gate::exp_zz(up, dn, AngleExpr::param(t0_up)))?;
                c.push(Gate::rz(up, AngleExpr::scaled_param(t1_up, -2.0)))?;
                c.push(Gate::exp_zz(up, dn, AngleExpr::param(t0_dn)))?;
                c.push(Gate::rz(dn, AngleExpr::scaled_param(t1_dn, -2.0)))?;
            }
        }
    }
    Ok(c)
}

/// Expand one gate into the CNOT + rotation realization. Non-exponential
/// gates pass through unchanged.
pub fn compile_gate(gate: &Gate) -> Vec<Gate> {
    let (a, b, expr) = match (gate.kind, gate.q1, &gate.angle) {
        (GateKind::ExpXX | GateKind::ExpYY | GateKind::ExpZZ, Some(b), Some(expr)) => {
            (gate.q0, b, expr)
        }
        _ => return vec![gate.clone()],
    };
    let core_rz = Gate::rz(b, expr.rescaled(-2.0));
    match gate.kind {
        GateKind::ExpZZ => vec![Gate::cnot(a, b), core_rz, Gate::cnot(a, b)],
        GateKind::ExpXX => vec![
            Gate::h(a),
            Gate::h(b),
            Gate::cnot(a, b),
            core_rz,
            Gate::cnot(a, b),
            Gate::h(a),
            Gate::h(b),
        ],
        GateKind::ExpYY => {
            let half_pi = std::f64::consts::FRAC_PI_2;
            vec![
                Gate::rx(a, AngleExpr::fixed(half_pi)),
                Gate::rx(b, AngleExpr::fixed(half_pi)),
                Gate::cnot(a, b),
                core_rz,
                Gate::cnot(a, b),
                Gate::rx(a, AngleExpr::fixed(-half_pi)),
                Gate::rx(b, AngleExpr::fixed(-half_pi)),
            ]
        }
        _ => unreachable!(),
    }
}

/// CNOT + rotation realization of `exp(i theta P(x)P)` on qubits (0, 1) at a
/// fixed angle.
pub fn compile_exponential(kind: GateKind, theta: f64) -> Result<Vec<Gate>> {
    let gate = match kind {
        GateKind::ExpXX => Gate::exp_xx(0, 1, AngleExpr::fixed(theta)),
        GateKind::ExpYY => Gate::exp_yy(0, 1, AngleExpr::fixed(theta)),
        GateKind::ExpZZ => Gate::exp_zz(0, 1, AngleExpr::fixed(theta)),
        _ => {
            return Err(VqtError::InvalidConfig(
                "compile_exponential expects EXP_XX/EXP_YY/EXP_ZZ".into(),
            ))
        }
    };
    Ok(compile_gate(&gate))
}

/// Compile every Pauli exponential in a circuit; parameters and their wiring
/// carry over unchanged.
pub fn compile_circuit(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.n_qubits(), circuit.kind(), circuit.layers());
    for &v in circuit.params() {
        out.add_param(v);
    }
    for g in circuit.gates() {
        for cg in compile_gate(g) {
            out.push(cg)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitFamily {
    Vqc1,
    Vqc2,
}

/// Closed-form and walked gate/parameter counts for one circuit family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub cnot_count: usize,
    pub params_per_layer: usize,
    pub total_params: usize,
}

/// CNOT and parameter counts, by formula and cross-checked by walking the
/// (compiled, ZZ-merged, open-hopping) circuit. A mismatch is a hard error.
/// `layers = 0` is degenerate: the builders reject it, the formulas return 0.
pub fn cost_report(family: CircuitFamily, n_sites: usize, layers: usize) -> Result<CostReport> {
    if n_sites < 2 {
        return Err(VqtError::InvalidConfig("cost_report needs n_sites >= 2".into()));
    }
    let (cnot_formula, params_per_layer) = match family {
        CircuitFamily::Vqc1 => (2 * layers * n_sites, 6 * n_sites),
        CircuitFamily::Vqc2 => (2 * layers * (5 * n_sites - 4), 8 * n_sites - 4),
    };
    let report = CostReport {
        cnot_count: cnot_formula,
        params_per_layer,
        total_params: params_per_layer * layers,
    };
    if layers == 0 {
        return Ok(report);
    }

    let circuit = match family {
        CircuitFamily::Vqc1 => build_vqc1(2 * n_sites, layers, 1)?,
        CircuitFamily::Vqc2 => {
            let cfg = HubbardConfig::new(n_sites, 1.0, 1.0, 1.0, crate::hubbard::Boundary::Open)?;
            compile_circuit(&build_vqc2(&cfg, layers, true)?)?
        }
    };
    let walked = circuit.count_kind(GateKind::CNOT);
    if walked != cnot_formula {
        return Err(VqtError::Numerical(format!(
            "CNOT count mismatch for {family:?} N={n_sites} L={layers}: formula {cnot_formula}, walked {walked}"
        )));
    }
    if circuit.n_params() != report.total_params {
        return Err(VqtError::Numerical(format!(
            "parameter count mismatch for {family:?} N={n_sites} L={layers}: formula {}, walked {}",
            report.total_params,
            circuit.n_params()
        )));
    }
    Ok(report)
}
