//! Parameterized circuits: an ordered gate list over named trainable
//! parameters, plus the per-parameter shift rule the gradient code uses.
//!
//! Every parameter is consumed by exactly one gate (the merged on-site ZZ
//! exponential consumes two parameters through their sum), which makes the
//! parameter-shift rule per parameter well defined: for a gate angle
//! `phi = s*theta + c`, rotation-style generators give
//! `df/dtheta = (s/2) [f(theta + pi/(2s)) - f(theta - pi/(2s))]` and Pauli
//! exponentials `exp(i phi P)` give
//! `df/dtheta = s [f(theta + pi/(4s)) - f(theta - pi/(4s))]`.

use std::fmt::Write as _;

use crate::error::{Result, VqtError};
use crate::gate::{AngleExpr, Gate, GateKind};
use crate::linalg::CMatrix;
use crate::statevector::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsatzKind {
    Vqc1,
    Vqc2,
    Custom,
}

impl AnsatzKind {
    fn name(self) -> &'static str {
        match self {
            AnsatzKind::Vqc1 => "vqc1",
            AnsatzKind::Vqc2 => "vqc2",
            AnsatzKind::Custom => "custom",
        }
    }
}

/// Parameter-shift evaluation rule: `df/dtheta = coef * (f(theta + shift) -
/// f(theta - shift))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftRule {
    pub shift: f64,
    pub coef: f64,
}

#[derive(Debug, Clone)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    params: Vec<f64>,
    shift_rules: Vec<Option<ShiftRule>>,
    layers: usize,
    kind: AnsatzKind,
}

impl Circuit {
    pub fn new(n_qubits: usize, kind: AnsatzKind, layers: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            params: Vec::new(),
            shift_rules: Vec::new(),
            layers,
            kind,
        }
    }

    /// Allocate a fresh trainable parameter; returns its id.
    pub fn add_param(&mut self, value: f64) -> u32 {
        self.params.push(value);
        self.shift_rules.push(None);
        (self.params.len() - 1) as u32
    }

    /// Append a gate, wiring shift rules for any parameters it consumes.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some(expr) = &gate.angle {
            if !expr.params.is_empty() {
                if expr.scale == 0.0 {
                    return Err(VqtError::InvalidConfig(
                        "parameterized gate with zero angle scale".into(),
                    ));
                }
                let rule = match gate.kind {
                    GateKind::RX | GateKind::RY | GateKind::RZ => ShiftRule {
                        shift: std::f64::consts::FRAC_PI_2 / expr.scale,
                        coef: expr.scale / 2.0,
                    },
                    GateKind::ExpXX | GateKind::ExpYY | GateKind::ExpZZ => ShiftRule {
                        shift: std::f64::consts::FRAC_PI_4 / expr.scale,
                        coef: expr.scale,
                    },
                    _ => unreachable!("validate() rejects angles on fixed gates"),
                };
                for &p in &expr.params {
                    let slot = self
                        .shift_rules
                        .get_mut(p as usize)
                        .ok_or_else(|| VqtError::InvalidConfig(format!("unknown parameter id {p}")))?;
                    if slot.is_some() {
                        return Err(VqtError::InvalidConfig(format!(
                            "parameter {p} consumed by more than one gate"
                        )));
                    }
                    *slot = Some(rule);
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    /// Current parameter values.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params.len() {
            return Err(VqtError::InvalidConfig(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                theta.len()
            )));
        }
        self.params.copy_from_slice(theta);
        Ok(())
    }

    pub fn shift_rule(&self, param: usize) -> Result<ShiftRule> {
        self.shift_rules
            .get(param)
            .and_then(|r| *r)
            .ok_or_else(|| VqtError::InvalidConfig(format!("parameter {param} has no consuming gate")))
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Apply all gates to `state` with explicit parameter values.
    pub fn apply_to(&self, state: &mut StateVector, theta: &[f64]) -> Result<()> {
        debug_assert_eq!(theta.len(), self.params.len());
        for g in &self.gates {
            state.apply(g, theta)?;
        }
        Ok(())
    }

    /// Evaluate the circuit on |0...0>.
    pub fn state_from_zero(&self, theta: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero_state(self.n_qubits);
        self.apply_to(&mut s, theta)?;
        Ok(s)
    }

    /// Dense unitary of the evaluated circuit (columns are evolved basis
    /// states). Capped at 12 qubits.
    pub fn unitary(&self, theta: &[f64]) -> Result<CMatrix> {
        if self.n_qubits > 12 {
            return Err(VqtError::ResourceLimit(format!(
                "dense unitary capped at 12 qubits, circuit has {}",
                self.n_qubits
            )));
        }
        let dim = 1usize << self.n_qubits;
        let mut u = CMatrix::zeros(dim);
        for col in 0..dim {
            let mut s = StateVector::basis_state(self.n_qubits, col);
            self.apply_to(&mut s, theta)?;
            for (row, amp) in s.amplitudes().iter().enumerate() {
                u[(row, col)] = *amp;
            }
        }
        Ok(u)
    }

    /// Line-based text form: `qubits=<n> layers=<L> kind=<...>` then one gate
    /// per line.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "qubits={} layers={} kind={}",
            self.n_qubits,
            self.layers,
            self.kind.name()
        );
        for g in &self.gates {
            let _ = write!(out, "{} {}", g.kind.name(), g.q0);
            if let Some(q1) = g.q1 {
                let _ = write!(out, " {q1}");
            }
            if let Some(expr) = &g.angle {
                if expr.is_fixed() {
                    let _ = write!(out, " angle={:.16e}", expr.offset);
                } else if expr.params.len() == 1 && expr.scale == 1.0 && expr.offset == 0.0 {
                    let _ = write!(out, " param={}", expr.params[0]);
                } else {
                    let ids: Vec<String> = expr.params.iter().map(|p| p.to_string()).collect();
                    let _ = write!(out, " params={} scale={:.16e}", ids.join(","), expr.scale);
                    if expr.offset != 0.0 {
                        let _ = write!(out, " offset={:.16e}", expr.offset);
                    }
                }
            }
            let _ = writeln!(out);
        }
        out
    }

    /// Parse the text form. Parameter values are not part of the format and
    /// come back as zeros; wiring (ids, scales, shift rules) is preserved.
    pub fn parse(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| VqtError::InvalidConfig("empty circuit text".into()))?;
        let mut n_qubits = None;
        let mut layers = None;
        let mut kind = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| VqtError::InvalidConfig(format!("bad header token {tok}")))?;
            match k {
                "qubits" => n_qubits = Some(v.parse::<usize>().map_err(bad_num)?),
                "layers" => layers = Some(v.parse::<usize>().map_err(bad_num)?),
                "kind" => {
                    kind = Some(match v {
                        "vqc1" => AnsatzKind::Vqc1,
                        "vqc2" => AnsatzKind::Vqc2,
                        "custom" => AnsatzKind::Custom,
                        _ => return Err(VqtError::InvalidConfig(format!("unknown kind {v}"))),
                    })
                }
                _ => return Err(VqtError::InvalidConfig(format!("unknown header key {k}"))),
            }
        }
        let (n_qubits, layers, kind) = match (n_qubits, layers, kind) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(VqtError::InvalidConfig("incomplete circuit header".into())),
        };

        struct Parsed {
            gate: Gate,
        }
        let mut parsed = Vec::new();
        let mut max_param: Option<u32> = None;
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let kind_g = GateKind::from_name(toks[0])
                .ok_or_else(|| VqtError::InvalidConfig(format!("unknown gate {}", toks[0])))?;
            let nq = if kind_g.is_two_qubit() { 2 } else { 1 };
            if toks.len() < 1 + nq {
                return Err(VqtError::InvalidConfig(format!("truncated gate line: {line}")));
            }
            let q0 = toks[1].parse::<usize>().map_err(bad_num)?;
            let q1 = if nq == 2 {
                Some(toks[2].parse::<usize>().map_err(bad_num)?)
            } else {
                None
            };
            let mut angle: Option<AngleExpr> = None;
            let mut scale: Option<f64> = None;
            let mut offset = 0.0f64;
            let mut ids: Vec<u32> = Vec::new();
            for tok in &toks[1 + nq..] {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| VqtError::InvalidConfig(format!("bad gate token {tok}")))?;
                match k {
                    "angle" => angle = Some(AngleExpr::fixed(v.parse::<f64>().map_err(bad_num)?)),
                    "param" => ids = vec![v.parse::<u32>().map_err(bad_num)?],
                    "params" => {
                        ids = v
                            .split(',')
                            .map(|s| s.parse::<u32>().map_err(bad_num))
                            .collect::<Result<_>>()?
                    }
                    "scale" => scale = Some(v.parse::<f64>().map_err(bad_num)?),
                    "offset" => offset = v.parse::<f64>().map_err(bad_num)?,
                    _ => return Err(VqtError::InvalidConfig(format!("unknown gate key {k}"))),
                }
            }
            if !ids.is_empty() {
                for &id in &ids {
                    max_param = Some(max_param.map_or(id, |m| m.max(id)));
                }
                angle = Some(AngleExpr {
                    scale: scale.unwrap_or(1.0),
                    params: ids,
                    offset,
                });
            } else if kind_g.is_parameterized() && angle.is_none() {
                return Err(VqtError::InvalidConfig(format!(
                    "parameterized gate without angle: {line}"
                )));
            }
            parsed.push(Parsed {
                gate: Gate { kind: kind_g, q0, q1, angle },
            });
        }

        let mut circuit = Circuit::new(n_qubits, kind, layers);
        if let Some(m) = max_param {
            for _ in 0..=m {
                circuit.add_param(0.0);
            }
        }
        for p in parsed {
            circuit.push(p.gate)?;
        }
        Ok(circuit)
    }
}

fn bad_num<E: std::fmt::Display>(e: E) -> VqtError {
    VqtError::InvalidConfig(format!("bad number in circuit text: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_circuit() -> Circuit {
        let mut c = Circuit::new(4, AnsatzKind::Custom, 1);
        let p0 = c.add_param(0.0);
        let p1 = c.add_param(0.0);
        let p2 = c.add_param(0.0);
        let p3 = c.add_param(0.0);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::rx(1, AngleExpr::param(p0))).unwrap();
        c.push(Gate::cnot(0, 2)).unwrap();
        c.push(Gate::exp_xx(1, 3, AngleExpr::param(p1))).unwrap();
        c.push(Gate::exp_zz(0, 1, AngleExpr::param_sum([p2, p3]))).unwrap();
        c.push(Gate::rz(2, AngleExpr::fixed(0.25))).unwrap();
        c
    }

    #[test]
    fn serialize_roundtrip_preserves_wiring() {
        let c = sample_circuit();
        let text = c.serialize();
        let back = Circuit::parse(&text).unwrap();
        assert_eq!(back.n_qubits(), c.n_qubits());
        assert_eq!(back.n_params(), c.n_params());
        assert_eq!(back.gates(), c.gates());
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn double_consumption_rejected() {
        let mut c = Circuit::new(2, AnsatzKind::Custom, 1);
        let p = c.add_param(0.0);
        c.push(Gate::rx(0, AngleExpr::param(p))).unwrap();
        assert!(c.push(Gate::ry(1, AngleExpr::param(p))).is_err());
    }

    #[test]
    fn shift_rules_for_gate_families() {
        let mut c = Circuit::new(2, AnsatzKind::Custom, 1);
        let p0 = c.add_param(0.0);
        let p1 = c.add_param(0.0);
        c.push(Gate::ry(0, AngleExpr::param(p0))).unwrap();
        c.push(Gate::exp_zz(0, 1, AngleExpr::param(p1))).unwrap();
        let r0 = c.shift_rule(p0 as usize).unwrap();
        assert!((r0.shift - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((r0.coef - 0.5).abs() < 1e-15);
        let r1 = c.shift_rule(p1 as usize).unwrap();
        assert!((r1.shift - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((r1.coef - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_circuit_unitary_is_identity() {
        let c = Circuit::new(3, AnsatzKind::Custom, 0);
        let u = c.unitary(&[]).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(8)) < 1e-15);
    }
}
