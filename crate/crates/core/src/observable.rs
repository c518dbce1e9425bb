use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{QssError, Result};
use crate::spectral::z_sign;
use crate::state::StateVector;

/// Hermitian observables on the full register.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Identity,
    /// Pauli `Z` on one site.
    PauliZ(usize),
    /// Site-averaged magnetization `(1/N) Σ_j Z_j`.
    MeanZ,
    /// Any Hermitian matrix on the full Hilbert space.
    Dense(DMatrix<C64>),
}

impl Observable {
    pub fn dense(m: DMatrix<C64>) -> Result<Self> {
        let defect = crate::linalg::max_hermitian_defect(&m);
        if m.nrows() != m.ncols() || defect > 1e-12 {
            return Err(QssError::NotHermitian(defect));
        }
        Ok(Self::Dense(m))
    }

    /// `O|v⟩`.
    pub fn apply(&self, v: &StateVector) -> StateVector {
        let dim = v.dim();
        let n = dim.trailing_zeros() as usize;
        let amps = v.amplitudes();
        match self {
            Self::Identity => v.clone(),
            Self::PauliZ(site) => {
                assert!(*site < n, "site {site} out of range for {n} qubits");
                amps.iter()
                    .enumerate()
                    .map(|(s, a)| a * z_sign(s, *site, n))
                    .collect::<Vec<_>>()
                    .into()
            }
            Self::MeanZ => amps
                .iter()
                .enumerate()
                .map(|(s, a)| a * ((0..n).map(|j| z_sign(s, j, n)).sum::<f64>() / n as f64))
                .collect::<Vec<_>>()
                .into(),
            Self::Dense(m) => {
                assert_eq!(m.nrows(), dim, "observable dimension mismatch");
                let x = nalgebra::DVector::from_column_slice(amps);
                (m * x).as_slice().to_vec().into()
            }
        }
    }

    /// `⟨a|O|b⟩`.
    pub fn matrix_element(&self, a: &StateVector, b: &StateVector) -> C64 {
        a.inner(&self.apply(b))
    }

    /// `‖O‖_∞`.
    pub fn operator_norm(&self) -> f64 {
        match self {
            Self::Identity | Self::PauliZ(_) | Self::MeanZ => 1.0,
            Self::Dense(m) => m.clone().svd(false, false).singular_values.max(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_z_signs() {
        let v = StateVector::basis(8, 0b010);
        let out = Observable::PauliZ(1).apply(&v);
        assert_eq!(out.amplitudes()[0b010], C64::new(-1.0, 0.0));
        let out = Observable::PauliZ(0).apply(&v);
        assert_eq!(out.amplitudes()[0b010], C64::new(1.0, 0.0));
        let mz = Observable::MeanZ.matrix_element(&v, &v);
        assert!((mz.re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dense_requires_hermitian() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        assert!(Observable::dense(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.0, -1.0);
        let o = Observable::dense(m).unwrap();
        assert!((o.operator_norm() - 2.0).abs() < 1e-12);
    }
}
