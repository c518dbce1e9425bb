//! Time evolution rebuilt from quasi-stationary components.
//!
//! Replacing `H` by `H_W = Σ_A E_A Π_A` over a partition of the spectrum into
//! windows of width `W` gives `ρ_W(t)`, which stays within `e^{Wt} - 1` of the
//! true `ρ(t)` in trace distance.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::reduced_density_matrix;
use crate::error::{QssError, Result};
use crate::exec;
use crate::filter::EnergyWindow;
use crate::linalg::{partial_trace_outer, RegionSpec};
use crate::observable::Observable;
use crate::spectral::Spectrum;
use crate::state::StateVector;

/// Components lighter than this are dropped by default.
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-12;

/// Contiguous half-open windows `(E_0 + kW, E_0 + (k+1)W]` covering the
/// spectrum; the ground energy `E_0` belongs to window 0.
#[derive(Clone, Debug)]
pub struct WindowPartition {
    anchor: f64,
    width: f64,
    windows: Vec<EnergyWindow>,
    assignment: Vec<usize>,
}

pub fn partition_windows(spectrum: &Spectrum, width: f64) -> Result<WindowPartition> {
    if !(width.is_finite() && width > 0.0) {
        return Err(QssError::InvalidParameter(format!("window width must be positive, got {width}")));
    }
    let ev = spectrum.eigenvalues();
    let anchor = ev[0];
    let count = ((spectrum.bandwidth() / width).ceil() as usize).max(1);
    let windows = (0..count)
        .map(|k| EnergyWindow::new(anchor + (k as f64 + 0.5) * width, width))
        .collect::<Result<Vec<_>>>()?;
    let assignment = ev
        .iter()
        .map(|&e| {
            let x = (e - anchor) / width;
            if x <= 0.0 {
                0
            } else {
                (x.ceil() as usize).saturating_sub(1).min(count - 1)
            }
        })
        .collect();
    Ok(WindowPartition { anchor, width, windows, assignment })
}

impl WindowPartition {
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn windows(&self) -> &[EnergyWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Window index of each eigenvalue, in spectrum order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Populations `p_A` of every window for energy coefficients `c`.
    pub fn weights(&self, c: &[C64]) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for (x, &k) in c.iter().zip(&self.assignment) {
            w[k] += x.norm_sqr();
        }
        w
    }
}

#[derive(Clone, Debug)]
pub struct QssComponent {
    pub window_index: usize,
    /// `E_A`.
    pub center: f64,
    /// `p_A = ‖Π_A ψ‖²`.
    pub weight: f64,
    /// Normalized `|ψ_A⟩`.
    pub state: StateVector,
}

/// `|ψ⟩ = Σ_A √p_A |ψ_A⟩` over the retained windows.
#[derive(Clone, Debug)]
pub struct QssDecomposition {
    pub width: f64,
    pub components: Vec<QssComponent>,
    /// `(window index, p_A)` of empty windows and those below the weight floor.
    pub dropped: Vec<(usize, f64)>,
}

/// Exact decomposition by spectral projection.
pub fn qss_decompose(
    psi: &StateVector,
    partition: &WindowPartition,
    spectrum: &Spectrum,
    weight_floor: f64,
) -> Result<QssDecomposition> {
    psi.check_dim(spectrum.dim())?;
    let c = spectrum.to_energy_basis(psi);
    let weights = partition.weights(&c);
    let (kept, dropped): (Vec<_>, Vec<_>) = weights
        .iter()
        .copied()
        .enumerate()
        .partition(|&(_, w)| w > 0.0 && w >= weight_floor);
    let components = exec::map_items(&kept, |&(k, w)| {
        let s = 1.0 / w.sqrt();
        let ck: Vec<C64> = c
            .iter()
            .zip(partition.assignment())
            .map(|(x, &j)| if j == k { x * s } else { C64::new(0.0, 0.0) })
            .collect();
        QssComponent {
            window_index: k,
            center: partition.windows()[k].center,
            weight: w,
            state: spectrum.from_energy_basis(&ck),
        }
    });
    Ok(QssDecomposition { width: partition.width(), components, dropped })
}

/// Decomposition whose components come from an external preparation routine
/// (for example a fixed-point search), keeping the exact weights. `prepare`
/// receives the window index, the window and the exact component.
pub fn qss_decompose_prepared<F>(
    psi: &StateVector,
    partition: &WindowPartition,
    spectrum: &Spectrum,
    weight_floor: f64,
    prepare: F,
) -> Result<QssDecomposition>
where
    F: Fn(usize, &EnergyWindow, &StateVector) -> Result<StateVector> + Sync,
{
    let mut d = qss_decompose(psi, partition, spectrum, weight_floor)?;
    let prepared = exec::map_items(&d.components, |c| {
        prepare(c.window_index, &partition.windows()[c.window_index], &c.state)
    });
    for (c, s) in d.components.iter_mut().zip(prepared) {
        c.state = s?;
    }
    Ok(d)
}

impl QssDecomposition {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// `Σ_A √p_A e^{-iE_A t} |ψ_A⟩ = e^{-iH_W t}|ψ⟩`.
    pub fn evolve(&self, t: f64) -> StateVector {
        let dim = self.components.first().map_or(0, |c| c.state.dim());
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for c in &self.components {
            let f = C64::from_polar(c.weight.sqrt(), -c.center * t);
            for (o, a) in out.iter_mut().zip(c.state.amplitudes()) {
                *o += f * a;
            }
        }
        out.into()
    }
}

/// `e^{Wt} - 1`.
pub fn trace_distance_bound(width: f64, t: f64) -> f64 {
    (width * t).exp_m1()
}

/// `½‖ρ(t) - ρ_W(t)‖₁` for the full pure states.
pub fn full_trace_distance(psi: &StateVector, decomp: &QssDecomposition, spectrum: &Spectrum, t: f64) -> f64 {
    let exact = spectrum.evolve(psi, t);
    let approx = decomp.evolve(t);
    // √(1 - |⟨a|b⟩|²) as the norm of the component of `approx` orthogonal to
    // `exact`, which avoids cancellation near zero distance
    let n2 = approx.norm_sqr();
    let ov = exact.inner(&approx);
    let perp: f64 = approx
        .amplitudes()
        .iter()
        .zip(exact.amplitudes())
        .map(|(b, a)| (b - ov * a).norm_sqr())
        .sum();
    (perp / n2).sqrt()
}

/// `Tr_R̄ ρ(t)` from exact evolution.
pub fn exact_rdm(psi: &StateVector, spectrum: &Spectrum, region: &RegionSpec, t: f64) -> Result<DMatrix<C64>> {
    reduced_density_matrix(&spectrum.evolve(psi, t), region)
}

/// `⟨O(t)⟩` from exact evolution.
pub fn exact_expectation(psi: &StateVector, spectrum: &Spectrum, observable: &Observable, t: f64) -> f64 {
    let s = spectrum.evolve(psi, t);
    observable.matrix_element(&s, &s).re
}

/// `⟨O(t)⟩_W = Σ_{A,A'} √(p_A p_A') e^{i(E_A - E_A')t} ⟨ψ_A|O|ψ_A'⟩`.
#[derive(Clone, Debug)]
pub struct ExpectationReconstruction {
    centers: Vec<f64>,
    amplitudes: Vec<f64>,
    elements: DMatrix<C64>,
}

impl ExpectationReconstruction {
    pub fn new(decomp: &QssDecomposition, observable: &Observable) -> Self {
        let applied = exec::map_items(&decomp.components, |c| observable.apply(&c.state));
        let k = decomp.components.len();
        let elements = DMatrix::from_fn(k, k, |a, b| decomp.components[a].state.inner(&applied[b]));
        Self::from_elements(decomp, elements)
    }

    /// Use externally estimated elements `⟨ψ_A|O|ψ_A'⟩`, indexed like
    /// `decomp.components`.
    pub fn from_elements(decomp: &QssDecomposition, elements: DMatrix<C64>) -> Self {
        Self {
            centers: decomp.components.iter().map(|c| c.center).collect(),
            amplitudes: decomp.components.iter().map(|c| c.weight.sqrt()).collect(),
            elements,
        }
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn evaluate_complex(&self, t: f64) -> C64 {
        let k = self.centers.len();
        let ph: Vec<C64> = (0..k)
            .map(|a| C64::from_polar(self.amplitudes[a], self.centers[a] * t))
            .collect();
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..k {
            for b in 0..k {
                acc += ph[a] * ph[b].conj() * self.elements[(a, b)];
            }
        }
        acc
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.evaluate_complex(t).re
    }
}

/// Metadata for one cached block `√(p_A p_A') Tr_R̄ |ψ_A⟩⟨ψ_A'|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockInfo {
    pub a: usize,
    pub b: usize,
    pub e_a: f64,
    pub e_b: f64,
    pub weight: f64,
    pub frobenius: f64,
}

/// `Tr_R̄ ρ_W(t) = Σ_{A,A'} e^{-i(E_A - E_A')t} √(p_A p_A') Tr_R̄ |ψ_A⟩⟨ψ_A'|`.
#[derive(Clone, Debug)]
pub struct RdmReconstruction {
    centers: Vec<f64>,
    amplitudes: Vec<f64>,
    dim: usize,
    /// Blocks with `a <= b`; the rest follow by Hermitian conjugation.
    blocks: BTreeMap<(usize, usize), DMatrix<C64>>,
    pair_floor: f64,
    skipped: usize,
}

impl RdmReconstruction {
    /// Pairs with `√(p_A p_A')` below `pair_floor` are skipped.
    pub fn new(decomp: &QssDecomposition, region: &RegionSpec, pair_floor: f64) -> Result<Self> {
        let comps = &decomp.components;
        if let Some(c) = comps.first() {
            c.state.check_dim(1 << region.n_qubits())?;
        }
        let pairs: Vec<(usize, usize)> = (0..comps.len())
            .flat_map(|a| (a..comps.len()).map(move |b| (a, b)))
            .collect();
        let (kept, skipped): (Vec<_>, Vec<_>) = pairs
            .into_iter()
            .partition(|&(a, b)| (comps[a].weight * comps[b].weight).sqrt() >= pair_floor);
        let mats = exec::map_items(&kept, |&(a, b)| {
            let w = (comps[a].weight * comps[b].weight).sqrt();
            partial_trace_outer(comps[a].state.amplitudes(), comps[b].state.amplitudes(), region) * C64::new(w, 0.0)
        });
        Ok(Self {
            centers: comps.iter().map(|c| c.center).collect(),
            amplitudes: comps.iter().map(|c| c.weight.sqrt()).collect(),
            dim: 1 << region.len(),
            blocks: kept.into_iter().zip(mats).collect(),
            pair_floor,
            skipped: skipped.len(),
        })
    }

    pub fn pair_floor(&self) -> f64 {
        self.pair_floor
    }

    /// Number of `a <= b` pairs skipped by the floor.
    pub fn skipped_pairs(&self) -> usize {
        self.skipped
    }

    pub fn evaluate(&self, t: f64) -> DMatrix<C64> {
        let mut out = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (&(a, b), m) in &self.blocks {
            let ph = C64::from_polar(1.0, -(self.centers[a] - self.centers[b]) * t);
            let term = m * ph;
            if a != b {
                out += term.adjoint();
            }
            out += term;
        }
        out
    }

    pub fn inventory(&self) -> Vec<BlockInfo> {
        let mut v: Vec<BlockInfo> = self
            .blocks
            .iter()
            .map(|(&(a, b), m)| BlockInfo {
                a,
                b,
                e_a: self.centers[a],
                e_b: self.centers[b],
                weight: self.amplitudes[a] * self.amplitudes[b],
                frobenius: m.norm(),
            })
            .collect();
        v.sort_by_key(|i| (i.a, i.b));
        v
    }
}

/// One row of an expectation time series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub t: f64,
    pub exact: f64,
    pub reconstructed: f64,
    /// `(e^{Wt} - 1)‖O‖`.
    pub bound: f64,
}

pub fn expectation_time_series(
    psi: &StateVector,
    spectrum: &Spectrum,
    decomp: &QssDecomposition,
    observable: &Observable,
    times: &[f64],
) -> Vec<TimeSeriesPoint> {
    let rec = ExpectationReconstruction::new(decomp, observable);
    let norm = observable.operator_norm();
    exec::map_items(times, |&t| TimeSeriesPoint {
        t,
        exact: exact_expectation(psi, spectrum, observable, t),
        reconstructed: rec.evaluate(t),
        bound: trace_distance_bound(decomp.width, t) * norm,
    })
}

/// CSV `t,exact,reconstructed,bound` at 17 significant digits.
pub fn write_time_series_csv<W: Write>(points: &[TimeSeriesPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,exact,reconstructed,bound")?;
    for p in points {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", p.t, p.exact, p.reconstructed, p.bound)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_distance;
    use crate::product::{product_state, solve_bloch};
    use crate::spectral::{ising_spectrum, IsingParams};
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (Spectrum, StateVector) {
        let p = IsingParams::chaotic(n);
        let s = ising_spectrum(&p).unwrap();
        let psi = product_state(&solve_bloch(0.2, &p).unwrap(), n);
        (s, psi)
    }

    #[test]
    fn partition_covers_spectrum_half_open() {
        let (s, _) = setup(6);
        for w in [0.5, 1.0, 3.0, 100.0] {
            let part = partition_windows(&s, w).unwrap();
            assert_eq!(part.len(), ((s.bandwidth() / w).ceil() as usize).max(1));
            assert_eq!(part.assignment()[0], 0);
            for (&e, &k) in s.eigenvalues().iter().zip(part.assignment()) {
                let lo = part.anchor() + k as f64 * w;
                assert!(e >= lo - 1e-12 && e <= lo + w + 1e-12);
            }
            for (k, win) in part.windows().iter().enumerate() {
                assert_relative_eq!(win.center, part.anchor() + (k as f64 + 0.5) * w, epsilon = 1e-12);
            }
        }
        assert!(partition_windows(&s, 0.0).is_err());
    }

    #[test]
    fn boundary_eigenvalue_goes_to_lower_window() {
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 2.0, 2.5]));
        let s = Spectrum::from_hamiltonian(&h, 0.1).unwrap();
        let part = partition_windows(&s, 1.0).unwrap();
        assert_eq!(part.len(), 3);
        assert_eq!(part.assignment(), &[0, 0, 1, 2]);
    }

    #[test]
    fn decomposition_resums_to_initial_state() {
        let (s, psi) = setup(6);
        let part = partition_windows(&s, 1.0).unwrap();
        let d = qss_decompose(&psi, &part, &s, 0.0).unwrap();
        assert_relative_eq!(d.total_weight(), 1.0, epsilon = 1e-12);
        assert!(d.evolve(0.0).distance(&psi) < 1e-12);
        for c in &d.components {
            assert_relative_eq!(c.state.norm(), 1.0, epsilon = 1e-12);
        }
        let floored = qss_decompose(&psi, &part, &s, 1e-3).unwrap();
        assert_eq!(floored.components.len() + floored.dropped.len(), part.len());
        assert!(floored.dropped.iter().all(|&(_, w)| w < 1e-3));
    }

    #[test]
    fn fine_partitions_obey_the_operator_norm_bound() {
        // ‖H - H_W‖ ≤ W/2, so the state error is at most Wt/2
        let (s, psi) = setup(5);
        for w in [0.01, 0.1] {
            let d = qss_decompose(&psi, &partition_windows(&s, w).unwrap(), &s, 0.0).unwrap();
            for t in [0.3, 2.0] {
                assert!(full_trace_distance(&psi, &d, &s, t) <= 0.5 * w * t + 1e-12);
            }
        }
    }

    #[test]
    fn reconstructions_reduce_to_exact_at_zero_time() {
        let (s, psi) = setup(6);
        let part = partition_windows(&s, 0.8).unwrap();
        let d = qss_decompose(&psi, &part, &s, 0.0).unwrap();
        let o = Observable::PauliZ(0);
        let rec = ExpectationReconstruction::new(&d, &o);
        assert_relative_eq!(rec.evaluate(0.0), exact_expectation(&psi, &s, &o, 0.0), epsilon = 1e-10);
        assert!(rec.evaluate_complex(1.3).im.abs() < 1e-12);
        let region = RegionSpec::prefix(2, 6).unwrap();
        let rdm = RdmReconstruction::new(&d, &region, 0.0).unwrap();
        let exact = exact_rdm(&psi, &s, &region, 0.0).unwrap();
        assert!(trace_distance(&rdm.evaluate(0.0), &exact) < 1e-10);
        assert!(!rdm.inventory().is_empty());
    }

    #[test]
    fn reconstruction_matches_window_evolution() {
        let (s, psi) = setup(6);
        let d = qss_decompose(&psi, &partition_windows(&s, 0.7).unwrap(), &s, 0.0).unwrap();
        let region = RegionSpec::new(vec![1, 4], 6).unwrap();
        let rdm = RdmReconstruction::new(&d, &region, 0.0).unwrap();
        let o = Observable::MeanZ;
        let rec = ExpectationReconstruction::new(&d, &o);
        for t in [0.1, 0.7, 2.5] {
            let w = d.evolve(t);
            let direct = reduced_density_matrix(&w, &region).unwrap();
            assert!(trace_distance(&rdm.evaluate(t), &direct) < 1e-10);
            assert_relative_eq!(rec.evaluate(t), o.matrix_element(&w, &w).re, epsilon = 1e-10);
        }
    }

    #[test]
    fn trace_distance_bound_holds() {
        let (s, psi) = setup(6);
        for w in [0.25, 0.5, 1.0] {
            let d = qss_decompose(&psi, &partition_windows(&s, w).unwrap(), &s, 0.0).unwrap();
            for t in [0.05, 0.1, 0.3] {
                let td = full_trace_distance(&psi, &d, &s, t);
                assert!(td <= trace_distance_bound(w, t), "W={w} t={t}: {td}");
            }
        }
    }

    #[test]
    fn pair_floor_skips_light_blocks() {
        let (s, psi) = setup(6);
        let d = qss_decompose(&psi, &partition_windows(&s, 0.5).unwrap(), &s, 0.0).unwrap();
        let region = RegionSpec::prefix(1, 6).unwrap();
        let all = RdmReconstruction::new(&d, &region, 0.0).unwrap();
        assert_eq!(all.skipped_pairs(), 0);
        let some = RdmReconstruction::new(&d, &region, 1e-2).unwrap();
        assert!(some.skipped_pairs() > 0);
    }

    #[test]
    fn time_series_csv() {
        let (s, psi) = setup(4);
        let d = qss_decompose(&psi, &partition_windows(&s, 1.0).unwrap(), &s, 0.0).unwrap();
        let pts = expectation_time_series(&psi, &s, &d, &Observable::PauliZ(0), &[0.0, 0.1]);
        assert!((pts[1].exact - pts[1].reconstructed).abs() <= pts[1].bound);
        let mut buf = Vec::new();
        write_time_series_csv(&pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
