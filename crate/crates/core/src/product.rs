//! Zero-energy translation-invariant product states and generalized
//! reflections about a state.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QssError, Result};
use crate::spectral::IsingParams;
use crate::state::StateVector;

/// Single-qubit Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` on the `y ≥ 0` hemisphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    /// Single-qubit amplitudes `(a_0, a_1)` reproducing this Bloch vector.
    pub fn amplitudes(&self) -> [C64; 2] {
        if self.z <= -1.0 + 1e-15 {
            return [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        }
        let a0 = ((1.0 + self.z) / 2.0).sqrt();
        let denom = (2.0 * (1.0 + self.z)).sqrt();
        [C64::new(a0, 0.0), C64::new(self.x / denom, self.y / denom)]
    }
}

/// Bloch vector with the given `⟨Z⟩` whose product state has zero energy:
/// `z² + h z + g x = 0`, `y = +√(1 - x² - z²)`.
pub fn solve_bloch(z: f64, params: &IsingParams) -> Result<BlochVector> {
    if params.g == 0.0 {
        return Err(QssError::ZeroTransverseField);
    }
    let x = -(z * z + params.h * z) / params.g;
    let magnitude = x * x + z * z;
    if magnitude > 1.0 + 1e-12 || !magnitude.is_finite() {
        return Err(QssError::InfeasibleBloch { z, magnitude });
    }
    let y = (1.0 - magnitude).max(0.0).sqrt();
    Ok(BlochVector { x, y, z })
}

/// `N`-fold tensor power of the single-qubit state with Bloch vector `b`.
pub fn product_state(b: &BlochVector, n: usize) -> StateVector {
    let [a0, a1] = b.amplitudes();
    let dim = 1usize << n;
    let amps = (0..dim)
        .map(|s| {
            let ones = s.count_ones() as i32;
            a0.powi(n as i32 - ones) * a1.powi(ones)
        })
        .collect::<Vec<_>>();
    StateVector::new(amps)
}

/// `R_{ψ,φ} v = e^{-iφ} v + (e^{iφ} - e^{-iφ}) ⟨ψ|v⟩ ψ`.
pub fn reflect_about_state(psi: &StateVector, phi: f64, target: &StateVector) -> StateVector {
    let mut out = target.clone();
    reflect_in_place(psi.amplitudes(), phi, out.amplitudes_mut());
    out
}

/// Rank-one reflection acting on raw amplitude slices in any fixed basis.
pub(crate) fn reflect_in_place(psi: &[C64], phi: f64, target: &mut [C64]) {
    let overlap: C64 = psi.iter().zip(target.iter()).map(|(p, v)| p.conj() * v).sum();
    let down = C64::from_polar(1.0, -phi);
    let gain = (C64::from_polar(1.0, phi) - down) * overlap;
    for (v, p) in target.iter_mut().zip(psi) {
        *v = down * *v + gain * p;
    }
}
