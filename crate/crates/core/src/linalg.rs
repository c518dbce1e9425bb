//! Small dense helpers: partial traces, Hermitian spectra, trace norms.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{QssError, Result};

/// A set of qubits `R` of an `n`-qubit register; `R̄` is implied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionSpec {
    qubits: Vec<usize>,
    n: usize,
}

impl RegionSpec {
    pub fn new(qubits: Vec<usize>, n: usize) -> Result<Self> {
        let mut sorted = qubits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let reason = if qubits.is_empty() {
            Some("empty region")
        } else if sorted.len() != qubits.len() {
            Some("repeated qubit")
        } else if sorted.iter().any(|&q| q >= n) {
            Some("qubit index out of range")
        } else if qubits.len() == n {
            Some("region covers the whole system")
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(QssError::InvalidRegion { n, reason: reason.into() });
        }
        Ok(Self { qubits, n })
    }

    /// The first `len` sites, `0..len`.
    pub fn prefix(len: usize, n: usize) -> Result<Self> {
        Self::new((0..len).collect(), n)
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|q| !self.qubits.contains(q)).collect()
    }

    /// Complement as a region.
    pub fn complement_region(&self) -> Result<Self> {
        Self::new(self.complement(), self.n)
    }

    /// Split a full basis index into `(region index, complement index)`.
    /// The first listed qubit is the most significant bit of each part.
    pub(crate) fn split_index(&self, s: usize, complement: &[usize]) -> (usize, usize) {
        let n = self.n;
        let pick = |qs: &[usize]| qs.iter().fold(0usize, |acc, &q| (acc << 1) | ((s >> (n - 1 - q)) & 1));
        (pick(&self.qubits), pick(complement))
    }

    /// Reshape amplitudes into a `2^|R| × 2^|R̄|` matrix.
    pub(crate) fn reshape(&self, amps: &[C64]) -> DMatrix<C64> {
        let comp = self.complement();
        let mut m = DMatrix::<C64>::zeros(1 << self.len(), 1 << comp.len());
        for (s, a) in amps.iter().enumerate() {
            let (i, k) = self.split_index(s, &comp);
            m[(i, k)] = *a;
        }
        m
    }
}

/// `Tr_R̄ |a⟩⟨b|`.
pub fn partial_trace_outer(a: &[C64], b: &[C64], region: &RegionSpec) -> DMatrix<C64> {
    let ma = region.reshape(a);
    let mb = region.reshape(b);
    &ma * mb.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `‖M‖_1`, the sum of singular values.
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// `½‖ρ₁ - ρ₂‖_1`.
pub fn trace_distance(rho1: &DMatrix<C64>, rho2: &DMatrix<C64>) -> f64 {
    0.5 * trace_norm(&(rho1 - rho2))
}

/// `max_Π Tr[(ρ₁ - ρ₂)Π]` over projectors, attained by the projector onto the
/// positive eigenspace of the difference.
pub fn max_projector_gap(rho1: &DMatrix<C64>, rho2: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(&(rho1 - rho2)).into_iter().filter(|&x| x > 0.0).sum()
}

pub fn max_hermitian_defect(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
