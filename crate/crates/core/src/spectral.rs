//! Mixed-field Ising chain, its exact eigendecomposition, and exact
//! time evolution through the eigenbasis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{QssError, Result};
use crate::exec;
use crate::state::StateVector;

/// Largest qubit count for which a dense Hamiltonian is built.
pub const MAX_DENSE_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
}

/// `H = -Σ_j (Z_j Z_{j+1} + h Z_j + g X_j)` on `n` sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n: usize,
    pub g: f64,
    pub h: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl IsingParams {
    pub fn new(n: usize, g: f64, h: f64) -> Self {
        Self { n, g, h, boundary: Boundary::Periodic }
    }

    /// Couplings used for the chaotic Ising numerics, `g = -1.05`, `h = 0.5`.
    pub fn chaotic(n: usize) -> Self {
        Self::new(n, -1.05, 0.5)
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `⟨H²⟩` of a zero-energy translation-invariant product state, `N (g² + h²)`.
    pub fn product_state_variance(&self) -> f64 {
        self.n as f64 * (self.g * self.g + self.h * self.h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_DENSE_QUBITS {
            return Err(QssError::QubitCount { n: self.n, max: MAX_DENSE_QUBITS });
        }
        if !self.g.is_finite() || !self.h.is_finite() {
            return Err(QssError::InvalidParameter("Ising couplings must be finite".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn z_sign(index: usize, site: usize, n: usize) -> f64 {
    if (index >> (n - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense Ising Hamiltonian. Real symmetric, hence Hermitian.
pub fn build_ising(params: &IsingParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.n;
    let dim = params.dim();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for j in 0..n {
            let zj = z_sign(s, j, n);
            let zk = z_sign(s, (j + 1) % n, n);
            diag -= zj * zk + params.h * zj;
            let flipped = s ^ (1 << (n - 1 - j));
            h[(flipped, s)] -= params.g;
        }
        h[(s, s)] += diag;
    }
    Ok(h)
}

/// `τ = π / [2N(1 + |g| + |h|)]`, a bandwidth-safe evolution step.
pub fn choose_tau(params: &IsingParams) -> f64 {
    PI / (2.0 * params.n as f64 * (1.0 + params.g.abs() + params.h.abs()))
}

/// Exact spectral decomposition `H = V diag(E) Vᵀ` with ascending `E`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    /// Column `a` is `|E_a⟩` in the computational basis.
    eigenvectors: DMatrix<f64>,
    tau: f64,
    n_qubits: usize,
}

/// Diagonalize an Ising Hamiltonian and attach `τ` from [`choose_tau`].
pub fn diagonalize(h: &DMatrix<f64>, params: &IsingParams) -> Result<Spectrum> {
    let spec = Spectrum::from_hamiltonian(h, choose_tau(params))?;
    let wrap = spec.bandwidth() * spec.tau;
    if wrap > 2.0 * PI {
        return Err(QssError::InvalidParameter(format!(
            "spectral wrap condition violated: (E_max - E_min) tau = {wrap}"
        )));
    }
    Ok(spec)
}

/// Build and diagonalize in one step.
pub fn ising_spectrum(params: &IsingParams) -> Result<Spectrum> {
    let h = build_ising(params)?;
    diagonalize(&h, params)
}

impl Spectrum {
    /// Diagonalize any real symmetric matrix of power-of-two dimension.
    pub fn from_hamiltonian(h: &DMatrix<f64>, tau: f64) -> Result<Self> {
        let dim = h.nrows();
        if dim != h.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(QssError::Dimension { expected: dim.next_power_of_two(), got: dim });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(QssError::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let scale = h.amax().max(1.0);
        let asym = (h - h.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(QssError::NotHermitian(asym));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(QssError::Eigensolver("non-finite matrix entry".into()));
        }
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(QssError::Eigensolver("non-finite eigenvalue".into()));
        }
        let mut eigenvectors = DMatrix::<f64>::zeros(dim, dim);
        for (col, &a) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(a));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            tau,
            n_qubits: dim.trailing_zeros() as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn bandwidth(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    pub fn eigenstate(&self, a: usize) -> StateVector {
        self.eigenvectors
            .column(a)
            .iter()
            .map(|&x| C64::new(x, 0.0))
            .collect::<Vec<_>>()
            .into()
    }

    /// Amplitudes `⟨E_a|ψ⟩` for every `a`.
    pub fn to_energy_basis(&self, state: &StateVector) -> Vec<C64> {
        let dim = self.dim();
        assert_eq!(state.dim(), dim, "state dimension does not match spectrum");
        let psi = state.amplitudes();
        exec::map_range(dim, |a| {
            let col = self.eigenvectors.column(a);
            let col = col.as_slice();
            let mut acc = C64::new(0.0, 0.0);
            for (v, p) in col.iter().zip(psi) {
                acc += p * *v;
            }
            acc
        })
    }

    /// Inverse of [`Spectrum::to_energy_basis`].
    pub fn from_energy_basis(&self, coeffs: &[C64]) -> StateVector {
        let dim = self.dim();
        assert_eq!(coeffs.len(), dim, "coefficient count does not match spectrum");
        let mut out = vec![C64::new(0.0, 0.0); dim];
        exec::for_each_chunk_mut(&mut out, 64, |start, rows| {
            for (a, c) in coeffs.iter().enumerate() {
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let col = &self.eigenvectors.as_slice()[a * dim + start..a * dim + start + rows.len()];
                for (r, v) in rows.iter_mut().zip(col) {
                    *r += c * *v;
                }
            }
        });
        out.into()
    }

    /// `e^{-iHt}|ψ⟩`.
    pub fn evolve(&self, state: &StateVector, t: f64) -> StateVector {
        let mut c = self.to_energy_basis(state);
        self.evolve_energy_coeffs(&mut c, t);
        self.from_energy_basis(&c)
    }

    pub(crate) fn evolve_energy_coeffs(&self, coeffs: &mut [C64], t: f64) {
        for (c, &e) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= C64::from_polar(1.0, -e * t);
        }
    }

    /// Energy mean and variance of `state`.
    pub fn energy_moments(&self, state: &StateVector) -> (f64, f64) {
        moments_from_coeffs(&self.eigenvalues, &self.to_energy_basis(state))
    }
}

pub(crate) fn moments_from_coeffs(energies: &[f64], coeffs: &[C64]) -> (f64, f64) {
    let w: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let mean = energies
        .iter()
        .zip(coeffs)
        .map(|(e, c)| e * c.norm_sqr())
        .sum::<f64>()
        / w;
    let second = energies
        .iter()
        .zip(coeffs)
        .map(|(e, c)| e * e * c.norm_sqr())
        .sum::<f64>()
        / w;
    (mean, second - mean * mean)
}
