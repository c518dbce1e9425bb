use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use qss_core::analysis::{project_onto_window, window_populations};
use qss_core::filter::blur_params;
use qss_core::product::{product_state, solve_bloch};
use qss_core::search::{grover_iterate, p_star_preset, run_fp_search, search_degree, SearchMode, SearchPlan};
use qss_core::spectral::ising_spectrum;
use qss_core::{EnergyWindow, IsingParams, Spectrum, StateVector};

const DELTA_SQ: f64 = 1e-3;

fn chain(n: usize) -> (IsingParams, Spectrum) {
    let p = IsingParams::chaotic(n);
    let s = ising_spectrum(&p).unwrap();
    (p, s)
}

/// Windows of width `w` across the spectrum whose overlap with `psi` is at least `p_star`.
fn feasible_windows(s: &Spectrum, psi: &StateVector, w: f64, p_star: f64) -> Vec<(EnergyWindow, f64)> {
    let lo = s.eigenvalues()[0];
    let n_w = (s.bandwidth() / (0.5 * w)) as usize;
    (0..n_w)
        .filter_map(|k| {
            let win = EnergyWindow::new(lo + (k as f64 + 1.0) * 0.5 * w, w).ok()?;
            let (p_a, _) = window_populations(psi, &win, s);
            (p_a >= p_star).then_some((win, p_a))
        })
        .collect()
}

#[test]
fn halving_p_star_keeps_the_guarantee() {
    let (p, s) = chain(8);
    let psi = product_state(&solve_bloch(0.2, &p).unwrap(), 8);
    let p_star = p_star_preset(1.5, &p, 0.1);
    let windows = feasible_windows(&s, &psi, 1.5, p_star);
    assert!(windows.len() >= 10);
    for (w, _) in &windows {
        let mut ps = p_star;
        let mut last_d = 0;
        for _ in 0..3 {
            let plan = SearchPlan::new(DELTA_SQ.sqrt(), ps, SearchMode::Ideal).unwrap();
            assert!(plan.d >= last_d);
            last_d = plan.d;
            let r = run_fp_search(&psi, w, &plan, None, &s).unwrap();
            assert!(r.population_error <= DELTA_SQ, "p*={ps}: {}", r.population_error);
            assert!((r.step_norms.last().unwrap() - 1.0).abs() < 1e-12);
            ps /= 2.0;
        }
    }
}

#[test]
fn query_accounting_is_exact() {
    let (p, s) = chain(6);
    let psi = product_state(&solve_bloch(0.0, &p).unwrap(), 6);
    let w = EnergyWindow::new(0.0, 2.0).unwrap();
    let p_star = p_star_preset(2.0, &p, 0.1);
    let delta = DELTA_SQ.sqrt();
    let d = search_degree(delta, p_star);
    let blur = blur_params(delta, d, s.tau(), 1.0, 8.0).unwrap();
    let ideal = run_fp_search(&psi, &w, &SearchPlan::new(delta, p_star, SearchMode::Ideal).unwrap(), None, &s).unwrap();
    assert_eq!(ideal.q_h, 0);
    assert_eq!(ideal.q_psi as usize, d - 1);
    let plan = SearchPlan::new(delta, p_star, SearchMode::Blurred).unwrap();
    let r = run_fp_search(&psi, &w, &plan, Some(&blur), &s).unwrap();
    assert_eq!(r.q_h, ((d as u64 - 1) / 2) * 2 * blur.d_prime as u64);
    assert_eq!(r.q_psi as usize, d - 1);
    assert!(r.step_norms.windows(2).all(|x| x[1] <= x[0] + 1e-12));
    assert!(r.success_prob <= 1.0 && r.success_prob > 0.5);
}

#[test]
fn grover_toy_instance_reaches_the_target() {
    // four levels, one in the window, sin χ = 1/2
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]));
    let s = Spectrum::from_hamiltonian(&h, 0.2).unwrap();
    let amp = [0.5, 0.5, 0.5, 0.5];
    let psi: StateVector = amp.iter().map(|&a| C64::new(a, 0.0)).collect::<Vec<_>>().into();
    let w = EnergyWindow::new(0.0, 0.5).unwrap();
    let (target, p_a) = project_onto_window(&psi, &w, &s).unwrap();
    assert!((p_a - 0.25).abs() < 1e-15);
    let m0 = target.inner(&grover_iterate(&psi, &w, 0, &s));
    assert!((m0 - C64::new(0.5, 0.0)).norm() < 1e-14);
    // T_3(1/2) = 4/8 - 3/2 = -1
    let m1 = target.inner(&grover_iterate(&psi, &w, 1, &s));
    assert!((m1 - C64::new(-1.0, 0.0)).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ideal_output_is_normalized_and_in_window(center in -4.0f64..4.0, width in 1.0f64..3.0, z in -0.5f64..0.5) {
        let (p, s) = chain(6);
        let psi = product_state(&solve_bloch(z, &p).unwrap(), 6);
        let w = EnergyWindow::new(center, width).unwrap();
        let (p_a, _) = window_populations(&psi, &w, &s);
        prop_assume!(p_a > 1e-3);
        let plan = SearchPlan::new(DELTA_SQ.sqrt(), p_a, SearchMode::Ideal).unwrap();
        let r = run_fp_search(&psi, &w, &plan, None, &s).unwrap();
        prop_assert!((r.state.norm() - 1.0).abs() < 1e-12);
        prop_assert!(r.population_error <= DELTA_SQ);
        prop_assert!(r.fidelity_vs_ideal >= 1.0 - DELTA_SQ);
    }
}
