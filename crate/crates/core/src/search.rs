//! Fixed-point amplitude amplification onto an energy window, with ideal or
//! blurred window reflections, and the plain Grover iterate for reference.
//!
//! All products are evaluated in the energy eigenbasis: window reflections
//! are diagonal there and the state reflection is a rank-one update, so one
//! search step costs `O(D)` after a single basis change.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QssError, Result};
use crate::filter::{BlurSpec, EnergyWindow, SmoothedWindow};
use crate::product::reflect_in_place;
use crate::spectral::{IsingParams, Spectrum};
use crate::state::StateVector;

/// Windows whose weight falls below this are treated as empty.
pub const P_A_FLOOR: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Ideal,
    Blurred,
}

/// `d* = 2⌈ln(2/Δ) / (2√p*)⌉ + 1`.
pub fn search_degree(delta: f64, p_star: f64) -> usize {
    let x = (2.0 / delta).ln() / (2.0 * p_star.sqrt());
    2 * x.ceil().max(0.0) as usize + 1
}

/// `φ_k = 2(-1)^k cot⁻¹(√p* tan[(k+1)π/d])` for `k = 0..d-2`, with the
/// inverse cotangent taken on `(0, π)`.
pub fn search_phases(d: usize, p_star: f64) -> Vec<f64> {
    let sp = p_star.sqrt();
    (0..d.saturating_sub(1))
        .map(|k| {
            let x = sp * ((k + 1) as f64 * std::f64::consts::PI / d as f64).tan();
            let acot = std::f64::consts::FRAC_PI_2 - x.atan();
            if k % 2 == 0 {
                2.0 * acot
            } else {
                -2.0 * acot
            }
        })
        .collect()
}

/// `p* = factor · W_A / √⟨H²⟩` with `⟨H²⟩ = N(g² + h²)`.
pub fn p_star_preset(window_width: f64, params: &IsingParams, factor: f64) -> f64 {
    (factor * window_width / params.product_state_variance().sqrt()).min(1.0)
}

/// One fixed-point search run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPlan {
    pub delta: f64,
    pub p_star: f64,
    pub d: usize,
    pub phases: Vec<f64>,
    pub mode: SearchMode,
}

impl SearchPlan {
    /// Plan at the minimum degree `d = d*(Δ, p*)`.
    pub fn new(delta: f64, p_star: f64, mode: SearchMode) -> Result<Self> {
        Self::validate_inputs(delta, p_star)?;
        Self::with_degree(delta, p_star, search_degree(delta, p_star), mode)
    }

    pub fn with_degree(delta: f64, p_star: f64, d: usize, mode: SearchMode) -> Result<Self> {
        Self::validate_inputs(delta, p_star)?;
        if d.is_multiple_of(2) {
            return Err(QssError::InvalidParameter(format!("search degree must be odd, got {d}")));
        }
        let d_star = search_degree(delta, p_star);
        if d < d_star {
            return Err(QssError::InvalidParameter(format!("degree {d} is below d* = {d_star}")));
        }
        Ok(Self { delta, p_star, d, phases: search_phases(d, p_star), mode })
    }

    fn validate_inputs(delta: f64, p_star: f64) -> Result<()> {
        if !(delta > 0.0 && delta <= 2.0) || !(p_star > 0.0 && p_star <= 1.0) {
            return Err(QssError::InvalidParameter(format!(
                "need 0 < delta <= 2 and 0 < p* <= 1, got delta={delta}, p*={p_star}"
            )));
        }
        Ok(())
    }

    /// Number of window reflections, `(d-1)/2`.
    pub fn window_reflections(&self) -> usize {
        self.phases.len().div_ceil(2)
    }
}

/// Outcome of a search run.
#[derive(Clone, Debug)]
pub struct PreparationResult {
    /// Normalized output `|ψ̃_A⟩`.
    pub state: StateVector,
    /// The same state in the energy basis.
    pub energy_coeffs: Vec<C64>,
    /// `|F̃|ψ⟩|²`; one in ideal mode.
    pub success_prob: f64,
    /// `ε = Σ_{a∉A} |⟨E_a|ψ̃_A⟩|²`.
    pub population_error: f64,
    /// `|⟨ψ_A|ψ̃_A⟩|²` against `Π_A|ψ⟩/√p_A`.
    pub fidelity_vs_ideal: f64,
    /// `p_A = |Π_A|ψ⟩|²`.
    pub p_a: f64,
    /// Controlled-evolution queries.
    pub q_h: u64,
    /// State-preparation queries.
    pub q_psi: u64,
    /// Norm after each factor of the product.
    pub step_norms: Vec<f64>,
    /// `arg⟨ψ_A|ψ̃_A⟩`, the global phase picked up by the search.
    pub global_phase: f64,
}

impl PreparationResult {
    /// `1 - success_prob`.
    pub fn failure_prob(&self) -> f64 {
        1.0 - self.success_prob
    }

    /// Output with the search's global phase removed.
    pub fn phase_aligned_state(&self) -> StateVector {
        self.state.clone().scaled(C64::from_polar(1.0, -self.global_phase))
    }
}

/// Reflection values for every window step of `plan`, in the energy basis.
/// Each generalized reflection is applied at half the tabulated phase.
fn window_step_values(
    window: &EnergyWindow,
    plan: &SearchPlan,
    blur: Option<&BlurSpec>,
    spectrum: &Spectrum,
) -> Result<Vec<Vec<C64>>> {
    let window_phases: Vec<f64> = plan.phases.iter().step_by(2).map(|p| p / 2.0).collect();
    match plan.mode {
        SearchMode::Ideal => {
            let tau = spectrum.tau();
            let inside: Vec<bool> = spectrum
                .eigenvalues()
                .iter()
                .map(|&e| window.contains_periodic(e, tau))
                .collect();
            Ok(window_phases
                .iter()
                .map(|&phi| {
                    let (up, down) = (C64::from_polar(1.0, phi), C64::from_polar(1.0, -phi));
                    inside.iter().map(|&i| if i { up } else { down }).collect()
                })
                .collect())
        }
        SearchMode::Blurred => {
            let blur = blur.ok_or_else(|| QssError::InvalidParameter("blurred search needs a blur spec".into()))?;
            let smoothed = SmoothedWindow::new(window, blur)?;
            let s = smoothed.values_on(spectrum);
            Ok(window_phases.iter().map(|&phi| smoothed.reflection_values(&s, phi)).collect())
        }
    }
}

/// Run `R_{ψ,φ_{d-2}} R̃_{A,φ_{d-3}} ⋯ R_{ψ,φ_1} R̃_{A,φ_0} |ψ⟩`.
pub fn run_fp_search(
    psi: &StateVector,
    window: &EnergyWindow,
    plan: &SearchPlan,
    blur: Option<&BlurSpec>,
    spectrum: &Spectrum,
) -> Result<PreparationResult> {
    psi.check_dim(spectrum.dim())?;
    let c_psi = spectrum.to_energy_basis(psi);
    run_fp_search_energy(&c_psi, window, plan, blur, spectrum)
}

/// [`run_fp_search`] for an input already expressed in the energy basis.
pub fn run_fp_search_energy(
    c_psi: &[C64],
    window: &EnergyWindow,
    plan: &SearchPlan,
    blur: Option<&BlurSpec>,
    spectrum: &Spectrum,
) -> Result<PreparationResult> {
    let mask = window.mask(spectrum);
    let p_a: f64 = c_psi.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| c.norm_sqr()).sum();
    if p_a < P_A_FLOOR {
        return Err(QssError::EmptyWindow { p_a });
    }

    let steps = window_step_values(window, plan, blur, spectrum)?;
    let mut v = c_psi.to_vec();
    let mut step_norms = Vec::with_capacity(plan.phases.len());
    for (k, &phi) in plan.phases.iter().enumerate() {
        if k % 2 == 0 {
            v.iter_mut().zip(&steps[k / 2]).for_each(|(x, r)| *x *= r);
        } else {
            reflect_in_place(c_psi, phi / 2.0, &mut v);
        }
        step_norms.push(v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt());
    }

    let success_prob: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if success_prob < 1e-300 {
        return Err(QssError::InvalidParameter("search output has zero norm".into()));
    }
    let inv = 1.0 / success_prob.sqrt();
    v.iter_mut().for_each(|x| *x *= inv);

    let population_error: f64 = v.iter().zip(&mask).filter(|(_, &m)| !m).map(|(x, _)| x.norm_sqr()).sum();
    let overlap: C64 = c_psi
        .iter()
        .zip(&v)
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|((c, x), _)| c.conj() * x)
        .sum::<C64>()
        / p_a.sqrt();

    let reflections = plan.window_reflections() as u64;
    let q_h = match (plan.mode, blur) {
        (SearchMode::Blurred, Some(b)) => reflections * b.queries_per_reflection(),
        _ => 0,
    };
    let state = spectrum.from_energy_basis(&v);
    Ok(PreparationResult {
        state,
        energy_coeffs: v,
        success_prob: success_prob.min(1.0),
        population_error: population_error.clamp(0.0, 1.0),
        fidelity_vs_ideal: overlap.norm_sqr().min(1.0),
        p_a,
        q_h,
        q_psi: plan.phases.len() as u64,
        step_norms,
        global_phase: overlap.arg(),
    })
}

/// `(R_ψ R_A)^M |ψ⟩` with `R_x = 1 - 2Π_x`.
pub fn grover_iterate(psi: &StateVector, window: &EnergyWindow, m: usize, spectrum: &Spectrum) -> StateVector {
    let c_psi = spectrum.to_energy_basis(psi);
    let mask = window.mask(spectrum);
    let mut v = c_psi.clone();
    for _ in 0..m {
        v.iter_mut().zip(&mask).filter(|(_, &i)| i).for_each(|(x, _)| *x = -*x);
        let ov: C64 = c_psi.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
        v.iter_mut().zip(&c_psi).for_each(|(x, p)| *x -= 2.0 * ov * p);
    }
    spectrum.from_energy_basis(&v)
}

/// Flat JSON record of one preparation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub g: f64,
    pub h: f64,
    #[serde(rename = "E_A")]
    pub e_a: f64,
    #[serde(rename = "W_A")]
    pub w_a: f64,
    #[serde(rename = "B")]
    pub blur: Option<f64>,
    pub h_smooth: Option<f64>,
    pub d: usize,
    pub d_prime: Option<usize>,
    pub delta: f64,
    pub p_star: f64,
    pub success_prob: f64,
    pub population_error: f64,
    pub fidelity: f64,
    #[serde(rename = "q_H")]
    pub q_h: u64,
    pub q_psi: u64,
}

impl RunRecord {
    pub fn new(
        params: &IsingParams,
        window: &EnergyWindow,
        plan: &SearchPlan,
        blur: Option<&BlurSpec>,
        result: &PreparationResult,
    ) -> Self {
        let blur = if plan.mode == SearchMode::Blurred { blur } else { None };
        Self {
            n: params.n,
            g: params.g,
            h: params.h,
            e_a: window.center,
            w_a: window.width,
            blur: blur.map(|b| b.blur),
            h_smooth: blur.map(|b| b.h_smooth),
            d: plan.d,
            d_prime: blur.map(|b| b.d_prime),
            delta: plan.delta,
            p_star: plan.p_star,
            success_prob: result.success_prob,
            population_error: result.population_error,
            fidelity: result.fidelity_vs_ideal,
            q_h: result.q_h,
            q_psi: result.q_psi,
        }
    }
}
