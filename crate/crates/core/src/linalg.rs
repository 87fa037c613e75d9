//! Dense complex matrices and the numerical kernels the thermal reference
//! relies on: Hermitian eigendecomposition (Householder tridiagonalization
//! followed by implicit-shift QL) and a scaling-and-squaring matrix
//! exponential used as an independent cross-check route.

use num_complex::Complex64;

use crate::error::{Result, VqtError};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C_ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C_ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.data[r * n + c] = f(r, c);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    /// `self * other`.
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C_ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, |r, c| self.data[c * n + r].conj())
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.n;
        for r in 0..n {
            for c in r..n {
                if (self.data[r * n + c] - self.data[c * n + r].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (na, nb) = (self.n, other.n);
        let n = na * nb;
        let mut out = CMatrix::zeros(n);
        for ra in 0..na {
            for ca in 0..na {
                let a = self.data[ra * na + ca];
                if a == C_ZERO {
                    continue;
                }
                for rb in 0..nb {
                    for cb in 0..nb {
                        out.data[(ra * nb + rb) * n + (ca * nb + cb)] =
                            a * other.data[rb * nb + cb];
                    }
                }
            }
        }
        out
    }

    fn inf_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|r| self.row(r).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.n + c]
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and a unitary matrix whose columns
/// are the matching eigenvectors, so `a = v * diag(vals) * v†`.
///
/// Householder reduction to real symmetric tridiagonal form followed by
/// implicit-shift QL with eigenvector accumulation. Rotations are real, so
/// orthonormality of the complex eigenvector columns is preserved to machine
/// precision even across degenerate clusters.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.dim();
    if n == 0 {
        return Err(VqtError::InvalidConfig("empty matrix".into()));
    }
    if !a.is_hermitian(1e-9 * (1.0 + a.inf_norm())) {
        return Err(VqtError::Numerical(
            "hermitian_eigen called on a non-Hermitian matrix".into(),
        ));
    }
    if n == 1 {
        return Ok((vec![a[(0, 0)].re], CMatrix::identity(1)));
    }

    let mut w = a.clone();
    let mut d = vec![0.0f64; n];
    // e[i] couples d[i] and d[i+1]; e[n-1] is a sentinel.
    let mut e = vec![0.0f64; n];
    let mut taus = vec![C_ZERO; n.saturating_sub(2)];

    // Householder sweep: zero column k below the first subdiagonal. The
    // reflector H = I - tau v v† (zlarfg convention, v[0] = 1, beta real)
    // is stored in the zeroed part of column k plus taus[k].
    for k in 0..n - 2 {
        let alpha = w[(k + 1, k)];
        let xnorm2: f64 = (k + 2..n).map(|i| w[(i, k)].norm_sqr()).sum();
        if xnorm2 == 0.0 && alpha.im == 0.0 {
            taus[k] = C_ZERO;
            e[k] = alpha.re;
            w[(k + 1, k)] = C_ONE;
            continue;
        }
        let anorm = (alpha.norm_sqr() + xnorm2).sqrt();
        let beta = if alpha.re >= 0.0 { -anorm } else { anorm };
        let tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
        let denom = alpha - beta;
        for i in k + 2..n {
            let v = w[(i, k)] / denom;
            w[(i, k)] = v;
        }
        w[(k + 1, k)] = C_ONE;
        taus[k] = tau;
        e[k] = beta;

        // Two-sided rank-2 update of the trailing block:
        //   p = tau A v,  u = p - (tau̅ (v†p)/2) v,  A -= v u† + u v†
        let m = n - (k + 1);
        let mut p = vec![C_ZERO; m];
        for i in 0..m {
            let mut s = C_ZERO;
            for j in 0..m {
                s += w[(k + 1 + i, k + 1 + j)] * w[(k + 1 + j, k)];
            }
            p[i] = tau * s;
        }
        let vtp: Complex64 = (0..m).map(|i| w[(k + 1 + i, k)].conj() * p[i]).sum();
        let corr = tau.conj() * vtp * 0.5;
        for i in 0..m {
            p[i] -= corr * w[(k + 1 + i, k)];
        }
        for i in 0..m {
            let vi = w[(k + 1 + i, k)];
            let ui = p[i];
            for j in 0..m {
                let vj = w[(k + 1 + j, k)];
                let uj = p[j];
                let delta = vi * uj.conj() + ui * vj.conj();
                w[(k + 1 + i, k + 1 + j)] -= delta;
            }
        }
    }

    for i in 0..n {
        d[i] = w[(i, i)].re;
    }
    // The final subdiagonal element never went through a reflector and may
    // still carry a phase; absorb it into the last basis column.
    let z = w[(n - 1, n - 2)];
    let zn = z.norm();
    e[n - 2] = zn;
    let last_phase = if zn > 0.0 { z / zn } else { C_ONE };

    // Accumulate Q = H_0 H_1 ... H_{n-3} backward.
    let mut q = CMatrix::identity(n);
    for k in (0..n.saturating_sub(2)).rev() {
        let tau = taus[k];
        if tau == C_ZERO {
            continue;
        }
        for j in 0..n {
            let mut s = C_ZERO;
            for i in k + 1..n {
                s += w[(i, k)].conj() * q[(i, j)];
            }
            let ts = tau * s;
            for i in k + 1..n {
                let v = w[(i, k)];
                q[(i, j)] -= ts * v;
            }
        }
    }
    for i in 0..n {
        let v = q[(i, n - 1)] * last_phase;
        q[(i, n - 1)] = v;
    }

    // Implicit-shift QL on the real tridiagonal (d, e), rotating the complex
    // eigenvector columns of q as we go.
    tql_implicit(&mut d, &mut e, &mut q)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let d_sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut v = CMatrix::zeros(n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            v[(r, new_c)] = q[(r, old_c)];
        }
    }
    Ok((d_sorted, v))
}

fn tql_implicit(d: &mut [f64], e: &mut [f64], q: &mut CMatrix) -> Result<()> {
    let n = d.len();
    e[n - 1] = 0.0;
    // Deflation needs an absolute floor next to the relative test: spectra
    // spanning hundreds of orders of magnitude (Gibbs states at large beta)
    // leave whole blocks of noise-scale diagonals whose couplings are the
    // same size as their neighborhood, so the relative test never fires.
    // The tridiagonal entries carry Householder rounding of order
    // eps * anorm, so couplings below that are indistinguishable from zero
    // and deflating them stays within the method's backward error.
    let anorm = (0..n)
        .map(|i| d[i].abs() + e[i].abs())
        .fold(0.0f64, f64::max);
    let floor = f64::EPSILON * anorm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(VqtError::Numerical(format!(
                    "tridiagonal QL failed to converge at l={l} m={m}: d[l]={:e} d[l+1]={:e} e[l]={:e} d[m]={:e} anorm={anorm:e} floor={floor:e}",
                    d[l],
                    d[l + 1],
                    e[l],
                    d[m],
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f2 = q[(k, i + 1)];
                    let qi = q[(k, i)];
                    q[(k, i + 1)] = qi * s + f2 * c;
                    q[(k, i)] = qi * c - f2 * s;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
///
/// Independent of the eigendecomposition path on purpose: it cross-checks
/// thermal-state golden values through a second algebraic route.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let norm = a.inf_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(0.5f64.powi(squarings as i32), 0.0);
    let b = a.scale(scale);

    let mut result = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=64 {
        term = term.mul(&b).scale(Complex64::new(1.0 / k as f64, 0.0));
        result = result.add(&term);
        if term.frobenius_norm() <= 1e-18 * result.frobenius_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    result
}
