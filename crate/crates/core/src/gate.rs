//! Gate set of the simulator.
//!
//! Angles are linear expressions `scale * (theta[p0] + theta[p1] + ...) +
//! offset` over named trainable parameters, which covers fixed gates,
//! ordinary one-parameter gates, the merged on-site ZZ exponential whose
//! angle reads the sum of two parameters, and compiled rotations that carry
//! a -2x scale. Conventions: `RP(phi) = exp(-i phi P/2)` for P in {X,Y,Z};
//! `EXP_PP(theta) = exp(i theta P(x)P)`.

use num_complex::Complex64;

use crate::error::{Result, VqtError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    H,
    S,
    X,
    CNOT,
    ExpXX,
    ExpYY,
    ExpZZ,
}

impl GateKind {
    pub fn is_parameterized(self) -> bool {
        matches!(
            self,
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::ExpXX | GateKind::ExpYY | GateKind::ExpZZ
        )
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(
            self,
            GateKind::CNOT | GateKind::ExpXX | GateKind::ExpYY | GateKind::ExpZZ
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::X => "X",
            GateKind::CNOT => "CNOT",
            GateKind::ExpXX => "EXP_XX",
            GateKind::ExpYY => "EXP_YY",
            GateKind::ExpZZ => "EXP_ZZ",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "RX" => GateKind::RX,
            "RY" => GateKind::RY,
            "RZ" => GateKind::RZ,
            "H" => GateKind::H,
            "S" => GateKind::S,
            "X" => GateKind::X,
            "CNOT" => GateKind::CNOT,
            "EXP_XX" => GateKind::ExpXX,
            "EXP_YY" => GateKind::ExpYY,
            "EXP_ZZ" => GateKind::ExpZZ,
            _ => return None,
        })
    }
}

/// Linear angle expression `scale * sum(theta[params]) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleExpr {
    pub scale: f64,
    pub params: Vec<u32>,
    pub offset: f64,
}

impl AngleExpr {
    pub fn fixed(angle: f64) -> Self {
        Self { scale: 1.0, params: Vec::new(), offset: angle }
    }

    pub fn param(id: u32) -> Self {
        Self { scale: 1.0, params: vec![id], offset: 0.0 }
    }

    pub fn param_sum(ids: impl IntoIterator<Item = u32>) -> Self {
        Self { scale: 1.0, params: ids.into_iter().collect(), offset: 0.0 }
    }

    pub fn scaled_param(id: u32, scale: f64) -> Self {
        Self { scale, params: vec![id], offset: 0.0 }
    }

    /// The same expression with angle multiplied by a constant.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            params: self.params.clone(),
            offset: self.offset * factor,
        }
    }

    pub fn resolve(&self, theta: &[f64]) -> f64 {
        let s: f64 = self.params.iter().map(|&p| theta[p as usize]).sum();
        self.scale * s + self.offset
    }

    pub fn is_fixed(&self) -> bool {
        self.params.is_empty()
    }
}

/// One gate: kind, target qubit(s), optional angle expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub q0: usize,
    pub q1: Option<usize>,
    pub angle: Option<AngleExpr>,
}

impl Gate {
    fn one_q(kind: GateKind, q: usize, angle: Option<AngleExpr>) -> Self {
        Self { kind, q0: q, q1: None, angle }
    }

    fn two_q(kind: GateKind, a: usize, b: usize, angle: Option<AngleExpr>) -> Self {
        Self { kind, q0: a, q1: Some(b), angle }
    }

    pub fn h(q: usize) -> Self {
        Self::one_q(GateKind::H, q, None)
    }
    pub fn s(q: usize) -> Self {
        Self::one_q(GateKind::S, q, None)
    }
    pub fn x(q: usize) -> Self {
        Self::one_q(GateKind::X, q, None)
    }
    pub fn rx(q: usize, angle: AngleExpr) -> Self {
        Self::one_q(GateKind::RX, q, Some(angle))
    }
    pub fn ry(q: usize, angle: AngleExpr) -> Self {
        Self::one_q(GateKind::RY, q, Some(angle))
    }
    pub fn rz(q: usize, angle: AngleExpr) -> Self {
        Self::one_q(GateKind::RZ, q, Some(angle))
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::two_q(GateKind::CNOT, control, target, None)
    }
    pub fn exp_xx(a: usize, b: usize, angle: AngleExpr) -> Self {
        Self::two_q(GateKind::ExpXX, a, b, Some(angle))
    }
    pub fn exp_yy(a: usize, b: usize, angle: AngleExpr) -> Self {
        Self::two_q(GateKind::ExpYY, a, b, Some(angle))
    }
    pub fn exp_zz(a: usize, b: usize, angle: AngleExpr) -> Self {
        Self::two_q(GateKind::ExpZZ, a, b, Some(angle))
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.q0 >= n_qubits {
            return Err(VqtError::InvalidConfig(format!(
                "gate qubit {} out of range ({} qubits)",
                self.q0, n_qubits
            )));
        }
        match (self.kind.is_two_qubit(), self.q1) {
            (true, Some(q1)) => {
                if q1 >= n_qubits {
                    return Err(VqtError::InvalidConfig(format!(
                        "gate qubit {q1} out of range ({n_qubits} qubits)"
                    )));
                }
                if q1 == self.q0 {
                    return Err(VqtError::InvalidConfig(
                        "two-qubit gate needs two distinct qubits".into(),
                    ));
                }
            }
            (false, None) => {}
            _ => {
                return Err(VqtError::InvalidConfig(format!(
                    "gate {} has wrong qubit arity",
                    self.kind.name()
                )))
            }
        }
        if self.kind.is_parameterized() != self.angle.is_some() {
            return Err(VqtError::InvalidConfig(format!(
                "gate {}: angle present iff kind is parameterized",
                self.kind.name()
            )));
        }
        Ok(())
    }

    pub fn resolve_angle(&self, theta: &[f64]) -> f64 {
        self.angle.as_ref().map_or(0.0, |a| a.resolve(theta))
    }

    /// Dense 2x2 matrix (row-major) of a one-qubit gate at a resolved angle.
    pub fn matrix1(kind: GateKind, angle: f64) -> [Complex64; 4] {
        let c = Complex64::new;
        match kind {
            GateKind::H => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                [c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)]
            }
            GateKind::S => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
            GateKind::X => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            GateKind::RX => {
                let (sn, cs) = (angle / 2.0).sin_cos();
                [c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)]
            }
            GateKind::RY => {
                let (sn, cs) = (angle / 2.0).sin_cos();
                [c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]
            }
            GateKind::RZ => {
                let (sn, cs) = (angle / 2.0).sin_cos();
                [c(cs, -sn), c(0.0, 0.0), c(0.0, 0.0), c(cs, sn)]
            }
            _ => panic!("matrix1 called on two-qubit kind"),
        }
    }

    /// Dense 4x4 matrix (row-major) of a two-qubit gate at a resolved angle.
    /// Local index convention: bit 0 = first listed qubit, bit 1 = second.
    pub fn matrix2(kind: GateKind, angle: f64) -> [Complex64; 16] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut m = [z; 16];
        match kind {
            GateKind::CNOT => {
                // control = local bit 0, target = local bit 1
                m[0] = one; // 00 -> 00
                m[2 * 4 + 2] = one; // 10 -> 10 (control clear)
                m[3 * 4 + 1] = one; // 01 -> 11
                m[1 * 4 + 3] = one; // 11 -> 01
            }
            GateKind::ExpZZ => {
                let (sn, cs) = angle.sin_cos();
                let plus = Complex64::new(cs, sn);
                let minus = Complex64::new(cs, -sn);
                m[0] = plus;
                m[5] = minus;
                m[10] = minus;
                m[15] = plus;
            }
            GateKind::ExpXX => {
                let (sn, cs) = angle.sin_cos();
                let d = Complex64::new(cs, 0.0);
                let o = Complex64::new(0.0, sn);
                for i in 0..4 {
                    m[i * 4 + i] = d;
                    m[i * 4 + (3 - i)] = o;
                }
            }
            GateKind::ExpYY => {
                let (sn, cs) = angle.sin_cos();
                let d = Complex64::new(cs, 0.0);
                let om = Complex64::new(0.0, -sn);
                let op = Complex64::new(0.0, sn);
                for i in 0..4 {
                    m[i * 4 + i] = d;
                }
                m[3] = om; // 00 <-> 11 pick up -i sin
                m[12] = om;
                m[6] = op; // 01 <-> 10 pick up +i sin
                m[9] = op;
            }
            _ => panic!("matrix2 called on one-qubit kind"),
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_unitary1(m: &[Complex64; 4]) {
        // U U† = I
        for r in 0..2 {
            for c in 0..2 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    s += m[r * 2 + k] * m[c * 2 + k].conj();
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((s - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    fn assert_unitary2(m: &[Complex64; 16]) {
        for r in 0..4 {
            for c in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    s += m[r * 4 + k] * m[c * 4 + k].conj();
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((s - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn every_kind_is_unitary() {
        let angle = 0.7321;
        for kind in [GateKind::H, GateKind::S, GateKind::X, GateKind::RX, GateKind::RY, GateKind::RZ] {
            assert_unitary1(&Gate::matrix1(kind, angle));
        }
        for kind in [GateKind::CNOT, GateKind::ExpXX, GateKind::ExpYY, GateKind::ExpZZ] {
            assert_unitary2(&Gate::matrix2(kind, angle));
        }
    }

    #[test]
    fn angle_expression_resolution() {
        let theta = [0.25, -1.5, 3.0];
        let e = AngleExpr { scale: -2.0, params: vec![0, 2], offset: 0.5 };
        assert!((e.resolve(&theta) - (-2.0 * 3.25 + 0.5)).abs() < 1e-15);
        assert!((AngleExpr::fixed(1.25).resolve(&theta) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn arity_validation() {
        assert!(Gate::cnot(0, 0).validate(2).is_err());
        assert!(Gate::h(3).validate(2).is_err());
        assert!(Gate::cnot(0, 1).validate(2).is_ok());
        let bad = Gate { kind: GateKind::H, q0: 0, q1: None, angle: Some(AngleExpr::fixed(1.0)) };
        assert!(bad.validate(2).is_err());
    }
}
