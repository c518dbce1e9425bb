//! Invariant suite across every module, sized to finish in seconds.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use qss_core::analysis::{
    offdiag_element_exact, project_onto_window, reduced_density_matrix, von_neumann_entropy, window_populations,
    BranchPreparation,
};
use qss_core::dynamics::{
    exact_expectation, full_trace_distance, partition_windows, qss_decompose, trace_distance_bound,
    ExpectationReconstruction, RdmReconstruction,
};
use qss_core::filter::{
    apply_blurred_reflection, blur_coefficients, blur_params, eta_bound_uncorrected, q_coefficient, BlurSpec,
    SmoothedWindow,
};
use qss_core::linalg::{hermitian_eigenvalues, max_hermitian_defect, RegionSpec};
use qss_core::observable::Observable;
use qss_core::product::{product_state, reflect_about_state, solve_bloch};
use qss_core::search::{grover_iterate, p_star_preset, run_fp_search, search_degree, SearchMode, SearchPlan};
use qss_core::shadow::{shadow_reconstruct, ShadowSampler};
use qss_core::spectral::{build_ising, ising_spectrum};
use qss_core::{EnergyWindow, IsingParams, QssError, Spectrum, StateVector};

use crate::config::{ExperimentConfig, Fault, VERIFY_MAX_QUBITS};
use crate::error::CliError;

/// What the suite runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub n: usize,
    pub g: f64,
    pub h: f64,
    pub initial_z: Vec<f64>,
    pub delta_sq: f64,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n: 6, g: -1.05, h: 0.5, initial_z: vec![-0.3, 0.0, 0.3], delta_sq: 1e-3, seed: 0, fault: None }
    }
}

impl VerifyOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        if cfg.model.n > VERIFY_MAX_QUBITS {
            return Err(CliError::Config(format!(
                "verify runs at N <= {VERIFY_MAX_QUBITS}, config has N = {}",
                cfg.model.n
            )));
        }
        Ok(Self {
            n: cfg.model.n,
            g: cfg.model.g,
            h: cfg.model.h,
            initial_z: cfg.initial_z.clone(),
            delta_sq: cfg.search.delta_sq,
            seed: cfg.seed,
            fault: cfg.fault,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: value={:.6e} limit={:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.value,
            self.limit
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    fn at_most(&mut self, module: &'static str, name: &'static str, value: f64, limit: f64) {
        let check = Check { module, name, value, limit, passed: value <= limit };
        log::debug!("{check}");
        self.checks.push(check);
    }

    fn at_least(&mut self, module: &'static str, name: &'static str, value: f64, limit: f64) {
        let check = Check { module, name, value, limit, passed: value >= limit };
        self.checks.push(check);
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(f, "{} of {} invariants passed", self.checks.len() - self.failures(), self.checks.len())
    }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().map(f64::abs).fold(0.0, f64::max)
}

struct Ctx {
    opts: VerifyOptions,
    params: IsingParams,
    spectrum: Spectrum,
    states: Vec<StateVector>,
    /// Feasible windows of width `width` for state 0.
    windows: Vec<EnergyWindow>,
    width: f64,
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    if opts.n > VERIFY_MAX_QUBITS || opts.n < 3 {
        return Err(CliError::Config(format!("verify needs 3 <= N <= {VERIFY_MAX_QUBITS}, got {}", opts.n)));
    }
    let params = IsingParams::new(opts.n, opts.g, opts.h);
    let states = opts
        .initial_z
        .iter()
        .map(|&z| Ok(product_state(&solve_bloch(z, &params)?, opts.n)))
        .collect::<Result<Vec<_>, QssError>>()?;
    let spectrum = ising_spectrum(&params)?;
    let width = 2.0 * (opts.n as f64 / 18.0).sqrt();
    let p_star = p_star_preset(width, &params, 0.1);
    let lo = spectrum.eigenvalues()[0];
    let windows = (1..(spectrum.bandwidth() / (0.5 * width)) as usize)
        .filter_map(|k| EnergyWindow::new(lo + k as f64 * 0.5 * width, width).ok())
        .filter(|w| window_populations(&states[0], w, &spectrum).0 >= p_star)
        .collect();
    let ctx = Ctx { opts: opts.clone(), params, spectrum, states, windows, width };
    let mut r = VerifyReport::default();
    spectral_checks(&ctx, &mut r)?;
    state_checks(&ctx, &mut r);
    filter_checks(&ctx, &mut r)?;
    search_checks(&ctx, &mut r)?;
    analysis_checks(&ctx, &mut r)?;
    dynamics_checks(&ctx, &mut r)?;
    Ok(r)
}

fn spectral_checks(c: &Ctx, r: &mut VerifyReport) -> Result<(), CliError> {
    let h = build_ising(&c.params)?;
    r.at_most("spectral", "hermitian", max_abs((&h - h.transpose()).iter().copied()), 1e-12);
    let v = c.spectrum.eigenvectors();
    let e = DMatrix::from_diagonal(&DVector::from_column_slice(c.spectrum.eigenvalues()));
    r.at_most("spectral", "eigen_residual", max_abs((&h * v - v * e).iter().copied()), 1e-9);
    let gram = v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols());
    r.at_most("spectral", "orthonormal", max_abs(gram.iter().copied()), 1e-10);
    let n = c.params.n;
    let dim = c.params.dim();
    let shift = |i: usize| ((i << 1) | (i >> (n - 1))) & (dim - 1);
    let mut defect: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            defect = defect.max((h[(shift(i), shift(j))] - h[(i, j)]).abs());
        }
    }
    r.at_most("spectral", "translation_symmetry", defect, 1e-12);
    r.at_most("spectral", "wrap_phase", c.spectrum.bandwidth() * c.spectrum.tau(), 2.0 * PI);
    Ok(())
}

fn state_checks(c: &Ctx, r: &mut VerifyReport) {
    let blochs: Vec<_> = c.opts.initial_z.iter().map(|&z| solve_bloch(z, &c.params).unwrap()).collect();
    r.at_most("state", "bloch_norm", max_abs(blochs.iter().map(|b| b.x * b.x + b.y * b.y + b.z * b.z - 1.0)), 1e-12);
    r.at_most("state", "bloch_y_nonnegative", blochs.iter().map(|b| -b.y).fold(f64::NEG_INFINITY, f64::max), 0.0);
    r.at_most("state", "zero_energy", max_abs(c.states.iter().map(|s| c.spectrum.energy_moments(s).0)), 1e-10);
    r.at_most("state", "normalized", max_abs(c.states.iter().map(|s| s.norm() - 1.0)), 1e-12);
    let (psi, other) = (&c.states[0], c.spectrum.eigenstate(c.spectrum.dim() / 2));
    let mut worst: f64 = 0.0;
    for phi in [0.3, 1.2, -2.0] {
        worst = worst.max((reflect_about_state(psi, phi, &other).norm() - 1.0).abs());
        let fixed = reflect_about_state(psi, phi, psi);
        worst = worst.max(fixed.distance(&psi.clone().scaled(C64::from_polar(1.0, phi))));
    }
    r.at_most("state", "reflection_unitary", worst, 1e-12);
}

/// Short truncations where the η correction is far from negligible.
fn stress_specs() -> Vec<(EnergyWindow, BlurSpec, f64)> {
    let mut out = Vec::new();
    for tau in [0.03, 0.07] {
        for d_prime in [20usize, 120] {
            for spread in [1.5, 3.0] {
                for (h_smooth, phi) in [(4.0, PI / 2.0), (8.0, 2.0)] {
                    let blur = spread / ((d_prime + 1) as f64 * tau);
                    let spec = BlurSpec::new(blur, h_smooth, d_prime, tau).expect("valid spec");
                    let window = EnergyWindow::new(0.3, 1.5 * h_smooth * blur).expect("valid window");
                    out.push((window, spec, phi));
                }
            }
        }
    }
    out
}

fn filter_checks(c: &Ctx, r: &mut VerifyReport) -> Result<(), CliError> {
    let specs = stress_specs();
    // the unnormalized tail must fit under η - 1
    let mut excess = f64::NEG_INFINITY;
    for (w, spec, phi) in &specs {
        let mut tail = 0.0;
        let mut l = spec.d_prime as i64 + 1;
        while (l as f64 * spec.blur_phase()).powi(2) / 2.0 <= 745.0 {
            tail += spec.eta * (q_coefficient(w, *phi, spec, l).norm() + q_coefficient(w, *phi, spec, -l).norm());
            l += 1;
        }
        excess = excess.max(tail - (spec.eta - 1.0));
    }
    r.at_most("filter", "eta_tail", excess, 0.0);

    let delta = c.opts.delta_sq.sqrt();
    let p_star = p_star_preset(c.width, &c.params, 0.1);
    let d = search_degree(delta, p_star);
    let preset = blur_params(delta, d, c.spectrum.tau(), 1.0, 8.0)?;
    let window = c.windows.first().copied().unwrap_or(EnergyWindow::new(0.0, c.width)?);
    let mut sup: f64 = 0.0;
    let all = specs.iter().copied().chain([(window, preset, PI / 2.0), (window, preset, 1.0)]);
    for (w, mut spec, phi) in all {
        if c.opts.fault == Some(Fault::EtaSign) {
            spec.eta = eta_bound_uncorrected(&spec);
        }
        let fr = blur_coefficients(&w, phi, &spec)?;
        sup = sup.max(fr.grid_sup(Some(&c.spectrum)));
    }
    r.at_most("filter", "contraction", sup, 1.0 + 1e-12);

    let fr = blur_coefficients(&window, 1.0, &preset)?;
    let psi = &c.states[0];
    let (by_values, q) = apply_blurred_reflection(psi, &fr, &c.spectrum);
    r.at_most("filter", "route_agreement", by_values.distance(&fr.apply_by_powers(psi, &c.spectrum)), 1e-9);
    r.at_most("filter", "query_count", (q as f64 - 2.0 * preset.d_prime as f64).abs(), 0.0);
    let smooth = SmoothedWindow::new(&window, &preset)?;
    let s = smooth.values_on(&c.spectrum);
    let mut gap: f64 = 0.0;
    for phi in [0.4, 1.0, -2.5] {
        let fr = blur_coefficients(&window, phi, &preset)?;
        let a = fr.values_on(&c.spectrum);
        let b = smooth.reflection_values(&s, phi);
        gap = gap.max(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
    }
    r.at_most("filter", "factorization", gap, 1e-12);
    Ok(())
}

fn search_checks(c: &Ctx, r: &mut VerifyReport) -> Result<(), CliError> {
    let delta = c.opts.delta_sq.sqrt();
    let p_star = p_star_preset(c.width, &c.params, 0.1);
    let plan = SearchPlan::new(delta, p_star, SearchMode::Ideal)?;
    let mut worst: f64 = 0.0;
    for w in &c.windows {
        worst = worst.max(run_fp_search(&c.states[0], w, &plan, None, &c.spectrum)?.population_error);
    }
    r.at_least("search", "feasible_windows", c.windows.len() as f64, 3.0);
    r.at_most("search", "fp_guarantee", worst, c.opts.delta_sq);

    // four levels, one in the window, sin χ = 1/2: T_3(1/2) = -1
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]));
    let toy = Spectrum::from_hamiltonian(&h, 0.2)?;
    let psi = StateVector::new(vec![C64::new(0.5, 0.0); 4]);
    let w = EnergyWindow::new(0.0, 0.5)?;
    let (target, _) = project_onto_window(&psi, &w, &toy)?;
    let m1 = target.inner(&grover_iterate(&psi, &w, 1, &toy));
    r.at_most("search", "grover_identity", (m1 + 1.0).norm(), 1e-12);

    let window = c.windows.first().copied().unwrap_or(EnergyWindow::new(0.0, c.width)?);
    let d = plan.d;
    let blur = blur_params(delta, d, c.spectrum.tau(), 1.0, 8.0)?;
    let bplan = SearchPlan::new(delta, p_star, SearchMode::Blurred)?;
    let res = run_fp_search(&c.states[0], &window, &bplan, Some(&blur), &c.spectrum)?;
    let expected = ((d as u64 - 1) / 2) * 2 * blur.d_prime as u64;
    r.at_most("search", "query_accounting", (res.q_h.abs_diff(expected) + res.q_psi.abs_diff(d as u64 - 1)) as f64, 0.0);
    let rise = res.step_norms.windows(2).map(|x| x[1] - x[0]).fold(f64::NEG_INFINITY, f64::max);
    r.at_most("search", "blurred_monotone", rise, 1e-12);
    r.at_least("search", "blurred_fidelity", res.fidelity_vs_ideal, 0.9);
    Ok(())
}

fn analysis_checks(c: &Ctx, r: &mut VerifyReport) -> Result<(), CliError> {
    let s = &c.spectrum;
    let n = c.params.n;
    let mut pop: f64 = 0.0;
    for psi in &c.states {
        for w in &c.windows {
            let (a, b) = window_populations(psi, w, s);
            pop = pop.max((a + b - 1.0).abs());
        }
    }
    r.at_most("analysis", "populations_sum", pop, 1e-12);

    let (wa, wb) = match c.windows.as_slice() {
        [a, .., b] => (*a, *b),
        _ => return Err(CliError::Config("need at least two feasible windows".into())),
    };
    let psi = &c.states[0];
    let (target, _) = project_onto_window(psi, &wa, s)?;
    let region = RegionSpec::prefix(n / 2, n)?;
    let rdm = reduced_density_matrix(&target, &region)?;
    let min_eig = hermitian_eigenvalues(&rdm).into_iter().fold(f64::INFINITY, f64::min);
    let defect = max_hermitian_defect(&rdm).max((rdm.trace().re - 1.0).abs()).max(-min_eig);
    r.at_most("analysis", "rdm_valid", defect, 1e-12);
    let comp = reduced_density_matrix(&target, &region.complement_region()?)?;
    r.at_most("analysis", "entropy_symmetry", (von_neumann_entropy(&rdm) - von_neumann_entropy(&comp)).abs(), 1e-9);

    let o = Observable::PauliZ(0);
    let ab = offdiag_element_exact(psi, &wa, &wb, &o, s, &BranchPreparation::Projector)?;
    let ba = offdiag_element_exact(psi, &wb, &wa, &o, s, &BranchPreparation::Projector)?;
    r.at_most("analysis", "offdiag_conjugate", (ab.value - ba.value.conj()).norm(), 1e-12);
    let (tb, _) = project_onto_window(psi, &wb, s)?;
    r.at_most("analysis", "offdiag_direct", (ab.value - o.matrix_element(&target, &tb)).norm(), 1e-10);

    let small = RegionSpec::prefix(2, n)?;
    let sampler = ShadowSampler::from_state(&target, &small)?;
    let exact = reduced_density_matrix(&target, &small)?;
    r.at_most("analysis", "shadow_unbiased", max_abs((sampler.exact_mean() - &exact).iter().map(|z| z.norm())), 1e-12);
    let seed = c.opts.seed;
    let first = shadow_reconstruct(&sampler.sample_streams(seed, 4, 2000));
    let again = shadow_reconstruct(&sampler.sample_streams(seed, 4, 2000));
    r.at_most("analysis", "shadow_determinism", max_abs((&first - &again).iter().map(|z| z.norm())), 0.0);
    let samples = sampler.sample_streams(seed, 8, 5000);
    let (mean, err) = qss_core::shadow::shadow_reconstruct_with_stderr(&samples);
    let mut z: f64 = 0.0;
    for (k, m) in mean.iter().enumerate() {
        let (d, e) = (m - exact.as_slice()[k], err.as_slice()[k]);
        for (dev, sd) in [(d.re, e.re), (d.im, e.im)] {
            if sd > 0.0 {
                z = z.max(dev.abs() / sd);
            }
        }
    }
    r.at_most("analysis", "shadow_statistics_z", z, 6.0);
    Ok(())
}

fn dynamics_checks(c: &Ctx, r: &mut VerifyReport) -> Result<(), CliError> {
    let s = &c.spectrum;
    let n = c.params.n;
    let o = Observable::PauliZ(0);
    let region = RegionSpec::prefix(2, n)?;
    let (mut complete, mut at_zero, mut excess, mut rise, mut herm) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for psi in &c.states {
        for w in [2.0, 1.0, 0.5] {
            let coarse = qss_decompose(psi, &partition_windows(s, w)?, s, 0.0)?;
            let fine = qss_decompose(psi, &partition_windows(s, w / 2.0)?, s, 0.0)?;
            complete = complete.max((coarse.total_weight() - 1.0).abs());
            let rec = ExpectationReconstruction::new(&coarse, &o);
            at_zero = at_zero.max((rec.evaluate(0.0) - exact_expectation(psi, s, &o, 0.0)).abs());
            let rdm = RdmReconstruction::new(&coarse, &region, 0.0)?;
            for k in 0..=10 {
                let t = k as f64 / (10.0 * w);
                let a = full_trace_distance(psi, &coarse, s, t);
                let b = full_trace_distance(psi, &fine, s, t);
                excess = excess.max(a - trace_distance_bound(w, t));
                let obs = (rec.evaluate(t) - exact_expectation(psi, s, &o, t)).abs();
                excess = excess.max(obs - trace_distance_bound(w, t) * o.operator_norm());
                rise = rise.max(b - a);
                herm = herm.max(max_hermitian_defect(&rdm.evaluate(t)));
            }
        }
    }
    r.at_most("dynamics", "completeness", complete, 1e-12);
    r.at_most("dynamics", "exact_at_t0", at_zero, 1e-12);
    r.at_most("dynamics", "bound_compliance", excess, 1e-12);
    r.at_most("dynamics", "monotone_refinement", rise, 1e-10);
    r.at_most("dynamics", "rdm_hermitian", herm, 1e-12);
    Ok(())
}
