//! Diagnostics on prepared states.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{QssError, Result};
use crate::filter::{BlurSpec, EnergyWindow};
use crate::linalg::{hermitian_eigenvalues, partial_trace_outer, RegionSpec};
use crate::observable::Observable;
use crate::search::{run_fp_search_energy, SearchPlan, P_A_FLOOR};
use crate::spectral::Spectrum;
use crate::state::StateVector;

/// Largest region handled by [`reduced_density_matrix`].
pub const MAX_REGION_QUBITS: usize = 12;

/// `(p_in, ε)` with `p_in = Σ_{a∈A} |⟨E_a|ψ⟩|²` and `ε = 1 - p_in`.
pub fn window_populations(state: &StateVector, window: &EnergyWindow, spectrum: &Spectrum) -> (f64, f64) {
    populations_from_coeffs(&spectrum.to_energy_basis(state), window, spectrum)
}

pub fn populations_from_coeffs(coeffs: &[C64], window: &EnergyWindow, spectrum: &Spectrum) -> (f64, f64) {
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let inside: f64 = coeffs
        .iter()
        .zip(spectrum.eigenvalues())
        .filter(|(_, &e)| window.contains(e))
        .map(|(c, _)| c.norm_sqr())
        .sum();
    let p_in = inside / total;
    (p_in, 1.0 - p_in)
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    a.inner(b).norm_sqr()
}

/// Ideal QSS `Π_A|ψ⟩/√p_A` together with `p_A`.
pub fn project_onto_window(state: &StateVector, window: &EnergyWindow, spectrum: &Spectrum) -> Result<(StateVector, f64)> {
    let mut c = spectrum.to_energy_basis(state);
    let mut p_a = 0.0;
    for (x, &e) in c.iter_mut().zip(spectrum.eigenvalues()) {
        if window.contains(e) {
            p_a += x.norm_sqr();
        } else {
            *x = C64::new(0.0, 0.0);
        }
    }
    if p_a < P_A_FLOOR {
        return Err(QssError::EmptyWindow { p_a });
    }
    let s = 1.0 / p_a.sqrt();
    c.iter_mut().for_each(|x| *x *= s);
    Ok((spectrum.from_energy_basis(&c), p_a))
}

/// `Tr_R̄ |ψ⟩⟨ψ|`.
pub fn reduced_density_matrix(state: &StateVector, region: &RegionSpec) -> Result<DMatrix<C64>> {
    if region.len() > MAX_REGION_QUBITS {
        return Err(QssError::InvalidRegion {
            n: region.n_qubits(),
            reason: format!("region of {} qubits exceeds the cap {MAX_REGION_QUBITS}", region.len()),
        });
    }
    state.check_dim(1 << region.n_qubits())?;
    Ok(partial_trace_outer(state.amplitudes(), state.amplitudes(), region))
}

/// `-Σ λ ln λ` over eigenvalues above `1e-14`, in nats.
pub fn von_neumann_entropy(rdm: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(rdm)
        .into_iter()
        .filter(|&l| l > 1e-14)
        .map(|l| -l * l.ln())
        .sum()
}

/// Entropy of the first `⌈N/2⌉` sites.
pub fn half_chain_entropy(state: &StateVector) -> Result<f64> {
    let n = state.dim().trailing_zeros() as usize;
    let region = RegionSpec::prefix(n.div_ceil(2), n)?;
    Ok(von_neumann_entropy(&reduced_density_matrix(state, &region)?))
}

/// How the two register branches are prepared.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum BranchPreparation {
    /// Exact projections `Π_A|ψ⟩/√p_A`.
    Projector,
    /// Fixed-point search on each branch (ideal or blurred per plan mode),
    /// with the search's global phase removed.
    Search {
        plans: [SearchPlan; 2],
        blurs: [Option<BlurSpec>; 2],
    },
}

/// Off-diagonal element measured through a register qubit.
#[derive(Clone, Debug)]
pub struct OffDiagonal {
    /// Estimate of `⟨ψ_A|O|ψ_A'⟩`: the raw register expectation rescaled by
    /// the branch norms.
    pub value: C64,
    /// `⟨(X + iY) ⊗ O⟩` on the normalized joint register-system state.
    pub raw: C64,
    /// `⟨X ⊗ O⟩` and `⟨Y ⊗ O⟩` separately.
    pub x_part: f64,
    pub y_part: f64,
    /// Squared norms of the two (unnormalized) branch outputs.
    pub branch_norms: [f64; 2],
    /// Joint state `(|0⟩|φ_A⟩ + |1⟩|φ_A'⟩)/norm` with the register as qubit 0.
    pub joint_state: StateVector,
}

/// Branch outputs for the register-controlled search, as unnormalized energy
/// coefficients.
fn branch_outputs(
    c_psi: &[C64],
    windows: [&EnergyWindow; 2],
    prep: &BranchPreparation,
    spectrum: &Spectrum,
) -> Result<[Vec<C64>; 2]> {
    let one = |i: usize| -> Result<Vec<C64>> {
        let w = windows[i];
        match prep {
            BranchPreparation::Projector => {
                let mut c = c_psi.to_vec();
                let mut p = 0.0;
                for (x, &e) in c.iter_mut().zip(spectrum.eigenvalues()) {
                    if w.contains(e) {
                        p += x.norm_sqr();
                    } else {
                        *x = C64::new(0.0, 0.0);
                    }
                }
                if p < P_A_FLOOR {
                    return Err(QssError::EmptyWindow { p_a: p });
                }
                let s = 1.0 / p.sqrt();
                c.iter_mut().for_each(|x| *x *= s);
                Ok(c)
            }
            BranchPreparation::Search { plans, blurs } => {
                let r = run_fp_search_energy(c_psi, w, &plans[i], blurs[i].as_ref(), spectrum)?;
                let scale = C64::from_polar(r.success_prob.sqrt(), -r.global_phase);
                Ok(r.energy_coeffs.iter().map(|x| x * scale).collect())
            }
        }
    };
    Ok([one(0)?, one(1)?])
}

/// Build `(|0⟩|φ_A⟩ + |1⟩|φ_A'⟩)` from the register-controlled preparation,
/// normalize it, and evaluate `⟨(X + iY) ⊗ O⟩` from its `X ⊗ O` and `Y ⊗ O`
/// parts. With projector branches this equals `⟨ψ_A|O|ψ_A'⟩`.
pub fn offdiag_element_exact(
    psi: &StateVector,
    window_a: &EnergyWindow,
    window_b: &EnergyWindow,
    observable: &Observable,
    spectrum: &Spectrum,
    prep: &BranchPreparation,
) -> Result<OffDiagonal> {
    psi.check_dim(spectrum.dim())?;
    let c_psi = spectrum.to_energy_basis(psi);
    let [ca, cb] = branch_outputs(&c_psi, [window_a, window_b], prep, spectrum)?;
    let na: f64 = ca.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = cb.iter().map(|x| x.norm_sqr()).sum();
    let norm = (na + nb).sqrt();

    let phi_a = spectrum.from_energy_basis(&ca);
    let phi_b = spectrum.from_energy_basis(&cb);
    let mut joint: Vec<C64> = phi_a.amplitudes().iter().chain(phi_b.amplitudes()).copied().collect();
    joint.iter_mut().for_each(|x| *x /= norm);

    // register blocks of the normalized joint state
    let dim = spectrum.dim();
    let block0: StateVector = joint[..dim].to_vec().into();
    let block1: StateVector = joint[dim..].to_vec().into();
    let o1 = observable.apply(&block1);
    let o0 = observable.apply(&block0);
    let b01 = block0.inner(&o1);
    let b10 = block1.inner(&o0);
    // ⟨X⊗O⟩ = b01 + b10, ⟨Y⊗O⟩ = -i b01 + i b10
    let x_part = b01 + b10;
    let y_part = C64::new(0.0, -1.0) * b01 + C64::new(0.0, 1.0) * b10;
    let value = x_part + C64::new(0.0, 1.0) * y_part;
    Ok(OffDiagonal {
        value: value * (na + nb) / (2.0 * (na * nb).sqrt()),
        raw: value,
        x_part: x_part.re,
        y_part: y_part.re,
        branch_norms: [na, nb],
        joint_state: joint.into(),
    })
}
