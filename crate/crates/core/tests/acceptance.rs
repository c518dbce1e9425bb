//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qss_core::analysis::{
    half_chain_entropy, offdiag_element_exact, project_onto_window, window_populations, BranchPreparation,
};
use qss_core::dynamics::{
    exact_expectation, exact_rdm, full_trace_distance, partition_windows, qss_decompose, trace_distance_bound,
    ExpectationReconstruction, RdmReconstruction,
};
use qss_core::filter::{blur_coefficients, blur_params, eta_bound, q_coefficient, BlurSpec};
use qss_core::linalg::{trace_distance, RegionSpec};
use qss_core::observable::Observable;
use qss_core::product::{product_state, solve_bloch};
use qss_core::search::{
    grover_iterate, p_star_preset, run_fp_search, search_degree, search_phases, SearchMode, SearchPlan,
};
use qss_core::shadow::{shadow_reconstruct_with_stderr, ShadowSampler};
use qss_core::spectral::ising_spectrum;
use qss_core::{EnergyWindow, IsingParams, Spectrum, StateVector};

const DELTA_SQ: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Width scale from the reference size N = 18 to `n` sites.
fn width_scale(n: usize) -> f64 {
    (n as f64 / 18.0).sqrt()
}

/// Count strict increases (or decreases) against the expected direction.
fn inversions(values: &[f64], nonincreasing: bool) -> usize {
    values
        .windows(2)
        .filter(|w| if nonincreasing { w[1] > w[0] } else { w[1] < w[0] })
        .count()
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn zero_energy_state(p: &IsingParams, z: f64) -> StateVector {
    product_state(&solve_bloch(z, p).expect("feasible Bloch vector"), p.n)
}

fn fp_guarantee(spectra: &[(IsingParams, Spectrum)]) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (p, s) in spectra {
        let psi = zero_energy_state(p, 0.0);
        let w = width_scale(p.n);
        let p_star = p_star_preset(w, p, 0.1);
        let plan = SearchPlan::new(DELTA_SQ.sqrt(), p_star, SearchMode::Ideal).unwrap();
        let lo = s.eigenvalues()[0];
        let mut worst: f64 = 0.0;
        let mut count = 0;
        let mut k = 0;
        while lo + (k as f64 + 0.5) * w / 2.0 < lo + s.bandwidth() {
            let win = EnergyWindow::new(lo + (k as f64 + 0.5) * w / 2.0, w).unwrap();
            k += 1;
            let (p_a, _) = window_populations(&psi, &win, s);
            if p_a < p_star {
                continue;
            }
            let r = run_fp_search(&psi, &win, &plan, None, s).unwrap();
            worst = worst.max(r.population_error);
            count += 1;
        }
        pass &= count >= 10 && worst <= DELTA_SQ;
        details.push(format!("N={} windows={count} d={} max eps={worst:.3e}", p.n, plan.d));
    }
    outcome(pass, format!("{} (need eps <= {DELTA_SQ:e}, >= 10 windows)", details.join("; ")))
}

fn blur_scaling(p: &IsingParams, s: &Spectrum) -> Outcome {
    let psi = zero_energy_state(p, 0.0);
    let c = width_scale(p.n);
    let delta = DELTA_SQ.sqrt();
    let mut fid = Vec::new();
    let mut fail = Vec::new();
    for wk in [1.0, 2.0, 3.0, 4.0] {
        let w = wk * c;
        let p_star = p_star_preset(w, p, 0.1);
        let d = search_degree(delta, p_star);
        for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let blur = blur_params(delta, d, s.tau(), b, 8.0).unwrap();
            let plan = SearchPlan::new(delta, p_star, SearchMode::Blurred).unwrap();
            let (mut one_minus_f, mut p_fail, mut m) = (0.0, 0.0, 0.0);
            for e_a in [-1.0, 0.0, 1.0] {
                let win = EnergyWindow::new(e_a, w).unwrap();
                let r = run_fp_search(&psi, &win, &plan, Some(&blur), s).unwrap();
                one_minus_f += 1.0 - r.fidelity_vs_ideal;
                p_fail += r.failure_prob();
                m += 1.0;
            }
            let x = blur.blur / w;
            fid.push((x, one_minus_f / m));
            fail.push((x, p_fail / m));
        }
    }
    let sf = log_slope(&fid);
    let sp = log_slope(&fail);
    let pass = (sf - 1.0).abs() <= 0.3 && (0.5..=1.1).contains(&sp);
    outcome(pass, format!("N={} slope(1-F)={sf:.3} (need 1 +/- 0.3), slope(p_fail)={sp:.3} (need [0.5, 1.1])", p.n))
}

fn grover_identity() -> Outcome {
    let p = IsingParams::chaotic(6);
    let s = ising_spectrum(&p).unwrap();
    let psi = zero_energy_state(&p, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    while used < 10 {
        let win = EnergyWindow::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.5..3.0)).unwrap();
        let Ok((target, p_a)) = project_onto_window(&psi, &win, &s) else { continue };
        used += 1;
        let chi = p_a.sqrt().asin();
        for m in 0..=5usize {
            let got = target.inner(&grover_iterate(&psi, &win, m, &s));
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let expect = sign * ((2 * m + 1) as f64 * chi).sin();
            worst = worst.max((got - C64::new(expect, 0.0)).norm());
        }
    }
    outcome(worst <= 1e-10, format!("N=6, 10 windows, M<=5: max deviation {worst:.3e} (need <= 1e-10)"))
}

fn eta_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_margin = f64::INFINITY;
    let mut worst_sup: f64 = 0.0;
    let mut specs = 0;
    while specs < 20 {
        let tau = rng.gen_range(0.02..0.1);
        let d_prime = rng.gen_range(10..200usize);
        let spread = rng.gen_range(1.5..4.0);
        let blur_val = spread / ((d_prime + 1) as f64 * tau);
        let h_smooth = rng.gen_range(4.0..8.0);
        let window = EnergyWindow::new(rng.gen_range(-3.0..3.0), rng.gen_range(1.0..4.0)).unwrap();
        if h_smooth * blur_val >= window.width {
            continue;
        }
        let blur = BlurSpec::new(blur_val, h_smooth, d_prime, tau).unwrap();
        let phi = rng.gen_range(-PI..PI);
        specs += 1;
        // unrescaled coefficients are η q_ℓ; sum the tail until the Gaussian underflows
        let mut tail = 0.0;
        let mut l = d_prime as i64 + 1;
        loop {
            let t = blur.eta * (q_coefficient(&window, phi, &blur, l).norm() + q_coefficient(&window, phi, &blur, -l).norm());
            tail += t;
            if (l as f64 * blur.blur_phase()).powi(2) / 2.0 > 745.0 {
                break;
            }
            l += 1;
        }
        assert!((blur.eta - eta_bound(&blur)).abs() < 1e-15);
        worst_margin = worst_margin.min(blur.eta - 1.0 - tail);
        let fr = blur_coefficients(&window, phi, &blur).unwrap();
        worst_sup = worst_sup.max(fr.grid_sup(None));
    }
    let pass = worst_margin >= 0.0 && worst_sup <= 1.0 + 1e-12;
    outcome(pass, format!("20 specs: min (eta-1-tail)={worst_margin:.3e} (need >= 0), max grid sup={worst_sup:.15} (need <= 1+1e-12)"))
}

fn trace_distance_bound_check(p: &IsingParams, s: &Spectrum) -> Outcome {
    let psi = zero_energy_state(p, 0.0);
    let region = RegionSpec::prefix(p.n / 2, p.n).unwrap();
    let o = Observable::PauliZ(0);
    let mut worst_ratio: f64 = 0.0;
    let mut points = 0;
    for w in [0.25, 0.5, 1.0, 2.0] {
        let d = qss_decompose(&psi, &partition_windows(s, w).unwrap(), s, 1e-12).unwrap();
        let rdm = RdmReconstruction::new(&d, &region, 1e-12).unwrap();
        let rec = ExpectationReconstruction::new(&d, &o);
        for wt in [0.02, 0.05, 0.1, 0.2, 0.3] {
            let t = wt / w;
            let bound = trace_distance_bound(w, t);
            let full = full_trace_distance(&psi, &d, s, t);
            let reduced = trace_distance(&rdm.evaluate(t), &exact_rdm(&psi, s, &region, t).unwrap());
            let obs = (rec.evaluate(t) - exact_expectation(&psi, s, &o, t)).abs();
            worst_ratio = worst_ratio.max(full.max(reduced).max(obs) / bound);
            points += 1;
        }
    }
    outcome(worst_ratio <= 1.0, format!("N={}, {points} (W,t) points: max error/bound={worst_ratio:.3} (need <= 1)", p.n))
}

fn offdiag_protocol() -> Outcome {
    let p = IsingParams::chaotic(8);
    let s = ising_spectrum(&p).unwrap();
    let psi = zero_energy_state(&p, 0.0);
    let o = Observable::PauliZ(0);
    let v = DVector::from_column_slice(psi.amplitudes());
    let project = |w: &EnergyWindow| {
        let mut out = DVector::<C64>::zeros(s.dim());
        for (a, &e) in s.eigenvalues().iter().enumerate() {
            if (e - w.center).abs() < w.width / 2.0 {
                let col = s.eigenvectors().column(a).map(|x| C64::new(x, 0.0));
                out += &col * col.dotc(&v);
            }
        }
        out
    };
    let zsign = |i: usize| if (i >> (p.n - 1)) & 1 == 0 { 1.0 } else { -1.0 };
    let wins = [(-2.0, 1.0), (-0.5, 1.0), (0.5, 1.0), (2.0, 1.5)];
    let mut worst: f64 = 0.0;
    for &(ea, wa) in &wins {
        for &(eb, wb) in &wins {
            let a = EnergyWindow::new(ea, wa).unwrap();
            let b = EnergyWindow::new(eb, wb).unwrap();
            let (pa, pb) = (project(&a), project(&b));
            let zpb = DVector::from_fn(s.dim(), |i, _| pb[i] * zsign(i));
            let direct = pa.dotc(&zpb) / (pa.norm() * pb.norm());
            let got = offdiag_element_exact(&psi, &a, &b, &o, &s, &BranchPreparation::Projector).unwrap();
            worst = worst.max((got.value - direct).norm());
        }
    }
    // register instance with a known off-diagonal block
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    let joint = DVector::from_vec(vec![c(h, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.5)]);
    let target = DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, 0.0), c(0.0, h), c(0.0, 0.0)]);
    let sampler = ShadowSampler::new(&joint * joint.adjoint(), true).unwrap();
    let exact_gap = (sampler.exact_mean() - &target).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let samples = sampler.sample_streams(2024, 10, 10_000);
    let (mean, err) = shadow_reconstruct_with_stderr(&samples);
    let z_max = mean
        .iter()
        .zip(err.iter())
        .zip(target.iter())
        .map(|((m, e), t)| {
            let zr = if e.re > 0.0 { (m.re - t.re).abs() / e.re } else { 0.0 };
            let zi = if e.im > 0.0 { (m.im - t.im).abs() / e.im } else { 0.0 };
            zr.max(zi)
        })
        .fold(0.0, f64::max);
    let pass = worst <= 1e-8 && exact_gap < 1e-12 && z_max <= 5.0;
    outcome(
        pass,
        format!(
            "N=8 max |register - direct|={worst:.3e} (need <= 1e-8); shadow {} samples max z={z_max:.2} (need <= 5)",
            samples.len()
        ),
    )
}

fn thermalization_trends(p: &IsingParams, s: &Spectrum) -> Outcome {
    let c = width_scale(p.n);
    let widths: Vec<f64> = [8.0, 4.0, 2.0, 1.0].iter().map(|w| w * c).collect();
    let zs = [-0.5, 0.0, 0.5];
    let states: Vec<StateVector> = zs.iter().map(|&z| zero_energy_state(p, z)).collect();
    let mut spreads = Vec::new();
    let mut support = Vec::new();
    let mut entropies = vec![Vec::new(); zs.len()];
    for &w in &widths {
        let win = EnergyWindow::new(0.0, w).unwrap();
        let mut mz = Vec::new();
        for (k, psi) in states.iter().enumerate() {
            let (psi_a, _) = project_onto_window(psi, &win, s).unwrap();
            mz.push(Observable::MeanZ.matrix_element(&psi_a, &psi_a).re);
            entropies[k].push(half_chain_entropy(&psi_a).unwrap());
            if k == 0 {
                support.push(s.to_energy_basis(&psi_a).iter().filter(|x| x.norm_sqr() > 1e-12).count());
            }
        }
        let (lo, hi) = mz.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        spreads.push(hi - lo);
    }
    let spread_inv = inversions(&spreads, true);
    let ent_inv: Vec<usize> = entropies.iter().map(|e| inversions(e, false)).collect();
    let pass = spread_inv <= 1 && ent_inv.iter().all(|&i| i <= 1);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
    outcome(
        pass,
        format!(
            "N={} W=[{}] support={support:?}: <Z> spread [{}] inversions {spread_inv}; entropy {} inversions {:?} (need <= 1 each)",
            p.n,
            fmt(&widths),
            fmt(&spreads),
            entropies.iter().map(|e| format!("[{}]", fmt(e))).collect::<Vec<_>>().join(" "),
            ent_inv
        ),
    )
}

fn degree_and_phases() -> Outcome {
    let d = search_degree(DELTA_SQ.sqrt(), 0.01);
    let phi = search_phases(3, 1.0);
    let dev = (phi[0] - PI / 3.0).abs();
    outcome(d == 43 && dev <= 1e-12, format!("d*(sqrt(1e-3), 0.01)={d} (need 43); |phi_0 - pi/3|={dev:.2e} (need <= 1e-12)"))
}

fn main() {
    let start = Instant::now();
    let spectra: Vec<(IsingParams, Spectrum)> = [8usize, 10]
        .iter()
        .map(|&n| {
            let p = IsingParams::chaotic(n);
            let s = ising_spectrum(&p).unwrap();
            (p, s)
        })
        .collect();
    let setup = start.elapsed();
    let (p8, s8) = &spectra[0];
    let (p10, s10) = &spectra[1];

    type Check<'a> = (&'a str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("1 fp-guarantee", Duration::from_secs(120), Box::new(|| fp_guarantee(&spectra))),
        ("2 blur-scaling", Duration::from_secs(1800), Box::new(|| blur_scaling(p10, s10))),
        ("3 grover-identity", Duration::from_secs(60), Box::new(grover_identity)),
        ("4 eta-oracle", Duration::from_secs(60), Box::new(eta_oracle)),
        ("5 trace-distance-bound", Duration::from_secs(300), Box::new(|| trace_distance_bound_check(p8, s8))),
        ("6 offdiag-protocol", Duration::from_secs(600), Box::new(offdiag_protocol)),
        ("7 thermalization-trends", Duration::from_secs(1800), Box::new(|| thermalization_trends(p10, s10))),
        ("8 degree-phase-formulas", Duration::from_secs(1), Box::new(degree_and_phases)),
    ];

    println!("acceptance: spectra for N=8,10 in {:.2}s", setup.as_secs_f64());
    let mut failed = 0;
    for (name, cap, check) in &checks {
        let t0 = Instant::now();
        let out = check();
        let elapsed = t0.elapsed();
        let pass = out.pass && elapsed <= *cap;
        failed += usize::from(!pass);
        println!(
            "{} {name}: {} [{:.2}s, cap {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            cap.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
