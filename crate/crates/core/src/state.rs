use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QssError, Result};

/// Dense amplitude vector over the computational basis.
///
/// Qubit `j` of an `N`-qubit register is bit `N - 1 - j` of the basis index,
/// so amplitudes follow the usual Kronecker ordering `q_0 ⊗ q_1 ⊗ ...`.
/// The norm may be below one: blurred reflections are contractive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![C64::new(0.0, 0.0); dim] }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amps[index] = C64::new(1.0, 0.0);
        s
    }

    /// Haar-random normalized state (i.i.d. complex Gaussian amplitudes).
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= n);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= factor);
        self
    }

    /// Returns the normalized state, or an error when the norm vanishes.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(QssError::InvalidParameter("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(QssError::Dimension { expected: dim, got: self.dim() });
        }
        Ok(())
    }
}

impl From<Vec<C64>> for StateVector {
    fn from(amps: Vec<C64>) -> Self {
        Self::new(amps)
    }
}
