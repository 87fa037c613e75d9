//! Exact-diagonalization thermal reference.
//!
//! The Gibbs state of a Hermitian `H` at inverse temperature `beta` is
//! `rho = exp(-beta H)/Z` with `Z = tr exp(-beta H)`. Everything here runs
//! through one eigendecomposition per call, with the spectrum shifted by its
//! minimum before exponentiation so that `beta = 35` survives in f64.
//! Entropies use the natural logarithm throughout; the free energy is
//! `F = -ln(Z)/beta` and satisfies `F = E - S/beta` identically.

use num_complex::Complex64;

use crate::error::{Result, VqtError};
use crate::hubbard::{build_hamiltonian, number_density_rho, HubbardConfig};
use crate::linalg::{hermitian_eigen, CMatrix};

/// Exact thermal state and its scalar summaries.
#[derive(Debug, Clone)]
pub struct ThermalExact {
    pub beta: f64,
    pub rho: CMatrix,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    /// `<n_total>/N`; present when built for a Hubbard instance.
    pub number_density: Option<f64>,
}

/// Gibbs state of a dense Hermitian matrix.
pub fn exact_thermal(h: &CMatrix, beta: f64) -> Result<ThermalExact> {
    if beta <= 0.0 {
        return Err(VqtError::InvalidConfig(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let (vals, v) = hermitian_eigen(h)?;
    let n = vals.len();
    let min = vals[0];
    let weights: Vec<f64> = vals.iter().map(|&l| (-beta * (l - min)).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / z_shifted).collect();

    let energy: f64 = p.iter().zip(&vals).map(|(pi, li)| pi * li).sum();
    let entropy: f64 = -p
        .iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| pi * pi.ln())
        .sum::<f64>();
    // ln Z = ln(z_shifted) - beta*min
    let free_energy = min - z_shifted.ln() / beta;

    // rho = V diag(p) V†
    let mut rho = CMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v[(r, k)] * p[k] * v[(c, k)].conj();
            }
            rho[(r, c)] = acc;
        }
    }

    Ok(ThermalExact {
        beta,
        rho,
        free_energy,
        energy,
        entropy,
        number_density: None,
    })
}

/// Gibbs state of a Hubbard instance, with number density filled in.
pub fn hubbard_exact_thermal(config: &HubbardConfig, beta: f64) -> Result<ThermalExact> {
    let h = build_hamiltonian(config)?.to_dense()?;
    let mut t = exact_thermal(&h, beta)?;
    t.number_density = Some(number_density_rho(&t.rho, config));
    Ok(t)
}

/// Ground-space density matrix: the uniform mixture over all eigenvectors
/// whose eigenvalue sits within relative tolerance 1e-9 of the minimum.
/// Returns `(E0, rho0)`.
pub fn ground_state(h: &CMatrix) -> Result<(f64, CMatrix)> {
    let (vals, v) = hermitian_eigen(h)?;
    let n = vals.len();
    let e0 = vals[0];
    let tol = 1e-9 * (1.0 + e0.abs());
    let degeneracy = vals.iter().take_while(|&&l| (l - e0).abs() <= tol).count();
    let w = 1.0 / degeneracy as f64;
    let mut rho = CMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..degeneracy {
                acc += v[(r, k)] * v[(c, k)].conj();
            }
            rho[(r, c)] = acc * w;
        }
    }
    Ok((e0, rho))
}

/// `(E0, number_density0)` of a Hubbard instance in the beta -> infinity
/// limit, averaged over the degenerate ground space.
pub fn hubbard_ground_state(config: &HubbardConfig) -> Result<(f64, f64)> {
    let h = build_hamiltonian(config)?.to_dense()?;
    let (e0, rho0) = ground_state(&h)?;
    Ok((e0, number_density_rho(&rho0, config)))
}

fn validate_density_matrix(rho: &CMatrix, label: &str) -> Result<Vec<f64>> {
    let (vals, _) = hermitian_eigen(rho)?;
    if let Some(&min) = vals.first() {
        if min < -1e-8 {
            return Err(VqtError::InvalidState(format!(
                "{label} has eigenvalue {min:e} below -1e-8; not a density matrix"
            )));
        }
    }
    let tr: f64 = vals.iter().sum();
    if (tr - 1.0).abs() > 1e-8 {
        return Err(VqtError::InvalidState(format!(
            "{label} has trace {tr}, expected 1 within 1e-8"
        )));
    }
    Ok(vals)
}

/// Zero out eigenvalues below a relative threshold before taking square
/// roots: rank-deficient inputs carry O(1e-16) noise eigenvalues whose raw
/// square roots would pollute the trace at the 1e-8 level.
fn clip_spectrum(vals: &[f64]) -> Vec<f64> {
    let max = vals.iter().fold(0.0f64, |m, &l| m.max(l));
    let floor = 1e-13 * max;
    vals.iter()
        .map(|&l| if l > floor { l } else { 0.0 })
        .collect()
}

fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let (vals, v) = hermitian_eigen(m)?;
    let n = vals.len();
    let roots: Vec<f64> = clip_spectrum(&vals).iter().map(|l| l.sqrt()).collect();
    let mut out = CMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v[(r, k)] * roots[k] * v[(c, k)].conj();
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Uhlmann fidelity `(tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2` in [0, 1].
///
/// Both arguments must be PSD with unit trace within 1e-8 (they are
/// renormalized inside); eigenvalues below -1e-8 are an error, small
/// negatives are clipped to zero.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let vals_r = validate_density_matrix(rho, "rho")?;
    let vals_s = validate_density_matrix(sigma, "sigma")?;
    let tr_r: f64 = vals_r.iter().sum();
    let tr_s: f64 = vals_s.iter().sum();
    let rho_n = rho.scale(Complex64::new(1.0 / tr_r, 0.0));
    let sigma_n = sigma.scale(Complex64::new(1.0 / tr_s, 0.0));

    let s_root = sqrt_psd(&sigma_n)?;
    let inner = s_root.mul(&rho_n).mul(&s_root);
    let (vals, _) = hermitian_eigen(&inner)?;
    if let Some(&min) = vals.first() {
        if min < -1e-8 {
            return Err(VqtError::InvalidState(format!(
                "fidelity inner matrix has eigenvalue {min:e}"
            )));
        }
    }
    let root_sum: f64 = clip_spectrum(&vals).iter().map(|l| l.sqrt()).sum();
    Ok((root_sum * root_sum).min(1.0))
}

/// `rho_rec = sum_i p_i V|i><i|V†` for a probability vector over basis
/// states and an evaluated circuit unitary. Its spectrum is exactly `p`.
pub fn reconstruct_density_matrix(p: &[f64], v: &CMatrix) -> Result<CMatrix> {
    let n = v.dim();
    if p.len() != n {
        return Err(VqtError::InvalidConfig(format!(
            "probability vector length {} != unitary dimension {n}",
            p.len()
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(VqtError::InvalidState(format!(
            "probabilities sum to {total}, expected 1 within 1e-8"
        )));
    }
    let mut rho = CMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v[(r, k)] * p[k] * v[(c, k)].conj();
            }
            rho[(r, c)] = acc;
        }
    }
    Ok(rho)
}

/// Von Neumann entropy `-tr(rho ln rho)` through the eigenvalues.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(rho)?;
    Ok(-vals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hubbard::Boundary;
    use crate::linalg::expm;
    use crate::pauli::{Pauli, PauliString, PauliSum};
    use crate::rng::make_rng;
    use rand::RngExt;

    fn single_z() -> CMatrix {
        PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())])
            .unwrap()
            .to_dense()
            .unwrap()
    }

    fn random_density(n: usize, seed: u64) -> CMatrix {
        let mut rng = make_rng(seed);
        let a = CMatrix::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let aa = a.mul(&a.adjoint());
        let tr = aa.trace().re;
        aa.scale(Complex64::new(1.0 / tr, 0.0))
    }

    #[test]
    fn single_qubit_closed_forms() {
        let h = single_z();
        let t = exact_thermal(&h, 1.0).unwrap();
        assert!((t.energy - (-(1.0f64).tanh())).abs() < 1e-10);
        assert!((t.free_energy - (-(2.0 * (1.0f64).cosh()).ln())).abs() < 1e-10);
        let s_expect = (2.0 * (1.0f64).cosh()).ln() - (1.0f64).tanh();
        assert!((t.entropy - s_expect).abs() < 1e-10);
        assert!((t.free_energy - (t.energy - t.entropy / t.beta)).abs() < 1e-9);
    }

    #[test]
    fn infinite_temperature_limit() {
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap();
        let t = hubbard_exact_thermal(&cfg, 1e-6).unwrap();
        let n = cfg.n_qubits() as f64;
        assert!((t.entropy - n * (2.0f64).ln()).abs() < 1e-4);
        assert!((t.number_density.unwrap() - 1.0).abs() < 1e-6);
        let dim = 1 << cfg.n_qubits();
        for i in 0..dim {
            assert!((t.rho[(i, i)].re - 1.0 / dim as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn beta_must_be_positive() {
        assert!(exact_thermal(&single_z(), 0.0).is_err());
        assert!(exact_thermal(&single_z(), -1.0).is_err());
    }

    #[test]
    fn rho_is_a_density_matrix() {
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Open).unwrap();
        let t = hubbard_exact_thermal(&cfg, 3.0).unwrap();
        assert!((t.rho.trace().re - 1.0).abs() < 1e-10);
        assert!(t.rho.max_abs_diff(&t.rho.adjoint()) < 1e-10);
        let (vals, _) = hermitian_eigen(&t.rho).unwrap();
        assert!(vals[0] > -1e-10);
    }

    #[test]
    fn survives_beta_35() {
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap();
        let t = hubbard_exact_thermal(&cfg, 35.0).unwrap();
        assert!(t.free_energy.is_finite());
        assert!(t.entropy >= 0.0);
        assert!((t.free_energy - (t.energy - t.entropy / 35.0)).abs() < 1e-9);
    }

    #[test]
    fn matches_independent_matrix_exponential_route() {
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap();
        let h = build_hamiltonian(&cfg).unwrap().to_dense().unwrap();
        let beta = 3.0;
        let t = exact_thermal(&h, beta).unwrap();

        // rho via expm(-beta (H - shift)) / tr, shift = min Gershgorin bound
        let n = h.dim();
        let shift = (0..n)
            .map(|i| {
                let row_sum: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| h[(i, j)].norm())
                    .sum();
                h[(i, i)].re - row_sum
            })
            .fold(f64::INFINITY, f64::min);
        let mut shifted = h.clone();
        for i in 0..n {
            shifted[(i, i)] -= Complex64::new(shift, 0.0);
        }
        let un = expm(&shifted.scale(Complex64::new(-beta, 0.0)));
        let z = un.trace().re;
        let rho2 = un.scale(Complex64::new(1.0 / z, 0.0));
        assert!(t.rho.max_abs_diff(&rho2) < 1e-10);

        let f2 = shift - z.ln() / beta;
        assert!((t.free_energy - f2).abs() < 1e-9);
    }

    #[test]
    fn entropy_nonincreasing_in_beta() {
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..12 {
            let beta = 0.05 * (35.0f64 / 0.05).powf(i as f64 / 11.0);
            let t = hubbard_exact_thermal(&cfg, beta).unwrap();
            assert!(t.entropy <= last + 1e-12);
            last = t.entropy;
        }
    }

    #[test]
    fn thermodynamic_consistency() {
        // E = d(beta F)/d beta by central difference
        let cfg = HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap();
        let beta = 1.0;
        let h = 1e-3;
        let tm = hubbard_exact_thermal(&cfg, beta - h).unwrap();
        let tp = hubbard_exact_thermal(&cfg, beta + h).unwrap();
        let t0 = hubbard_exact_thermal(&cfg, beta).unwrap();
        let d_beta_f = ((beta + h) * tp.free_energy - (beta - h) * tm.free_energy) / (2.0 * h);
        assert!((d_beta_f - t0.energy).abs() < 1e-5);
    }

    #[test]
    fn ground_state_limits() {
        let (e0, rho0) = ground_state(&single_z()).unwrap();
        assert!((e0 + 1.0).abs() < 1e-12);
        assert!((rho0[(1, 1)].re - 1.0).abs() < 1e-12);

        // fully degenerate: <Z> averages to zero over the eigenspace
        let (e0, rho0) = ground_state(&CMatrix::identity(2)).unwrap();
        assert!((e0 - 1.0).abs() < 1e-12);
        let z = single_z();
        let expect_z = rho0.mul(&z).trace().re;
        assert!(expect_z.abs() < 1e-12);
    }

    #[test]
    fn fidelity_special_values() {
        let rho = random_density(4, 3);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        // orthogonal pure states
        let mut a = CMatrix::zeros(2);
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        let mut b = CMatrix::zeros(2);
        b[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(fidelity(&a, &b).unwrap() < 1e-12);

        // diag(1,0) vs I/2 -> 0.5
        let half = CMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        assert!((fidelity(&a, &half).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fidelity_symmetry_and_pure_state_overlap() {
        let r1 = random_density(4, 11);
        let r2 = random_density(4, 13);
        let f12 = fidelity(&r1, &r2).unwrap();
        let f21 = fidelity(&r2, &r1).unwrap();
        assert!((f12 - f21).abs() < 1e-9);

        // pure states: fidelity = |<psi|phi>|^2
        let mut rng = make_rng(17);
        let dim = 4;
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let v: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect::<Vec<_>>()
        };
        let psi = mk(&mut rng);
        let phi = mk(&mut rng);
        let proj = |v: &[Complex64]| {
            CMatrix::from_fn(dim, |r, c| v[r] * v[c].conj())
        };
        let overlap: Complex64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
        let f = fidelity(&proj(&psi), &proj(&phi)).unwrap();
        assert!((f - overlap.norm_sqr()).abs() < 1e-9);
    }

    #[test]
    fn fidelity_rejects_non_states() {
        let mut bad = CMatrix::identity(2);
        bad[(0, 0)] = Complex64::new(1.5, 0.0);
        bad[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(fidelity(&bad, &CMatrix::identity(2).scale(Complex64::new(0.5, 0.0))).is_err());
    }

    #[test]
    fn reconstruction_spectrum_and_entropy() {
        // V = I, delta distribution
        let p = [1.0, 0.0, 0.0, 0.0];
        let rho = reconstruct_density_matrix(&p, &CMatrix::identity(4)).unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-12);

        // uniform p: V drops out
        let (_, v) = hermitian_eigen(&random_density(4, 23)).unwrap();
        let uni = [0.25; 4];
        let rho_u = reconstruct_density_matrix(&uni, &v).unwrap();
        assert!(rho_u.max_abs_diff(&CMatrix::identity(4).scale(Complex64::new(0.25, 0.0))) < 1e-10);

        // spectrum equals p as a multiset; von Neumann entropy = Shannon
        let mut rng = make_rng(29);
        let mut p: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
        let tot: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= tot);
        let rho = reconstruct_density_matrix(&p, &v).unwrap();
        let (mut vals, _) = hermitian_eigen(&rho).unwrap();
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in vals.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-9);
        }
        let shannon: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
        assert!((von_neumann_entropy(&rho).unwrap() - shannon).abs() < 1e-9);
    }
}
