use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qss_core::exec::{self, Execution};
use qss_core::filter::{blur_params, SmoothedWindow};
use qss_core::linalg::RegionSpec;
use qss_core::product::{product_state, solve_bloch};
use qss_core::search::{p_star_preset, run_fp_search, search_degree, SearchMode, SearchPlan};
use qss_core::shadow::ShadowSampler;
use qss_core::spectral::ising_spectrum;
use qss_core::{EnergyWindow, IsingParams};

const N: usize = 9;

fn modes(c: &mut Criterion, name: &str, mut f: impl FnMut()) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    for &mode in Execution::available() {
        group.bench_function(BenchmarkId::from_parameter(format!("{mode:?}")), |b| {
            b.iter(|| exec::with_mode(mode, &mut f))
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let p = IsingParams::chaotic(N);
    let s = ising_spectrum(&p).unwrap();
    let psi = product_state(&solve_bloch(0.0, &p).unwrap(), N);
    let w = (N as f64 / 18.0).sqrt();
    let window = EnergyWindow::new(0.0, w).unwrap();
    let delta = 1e-3f64.sqrt();
    let p_star = p_star_preset(w, &p, 0.1);
    let d = search_degree(delta, p_star);
    let blur = blur_params(delta, d, s.tau(), 0.5, 8.0).unwrap();
    let smoothed = SmoothedWindow::new(&window, &blur).unwrap();

    modes(c, "smoothed_window_values", || {
        black_box(smoothed.values_on(&s));
    });
    modes(c, "energy_basis_roundtrip", || {
        let c = s.to_energy_basis(&psi);
        black_box(s.from_energy_basis(&c));
    });
    let plan = SearchPlan::new(delta, p_star, SearchMode::Blurred).unwrap();
    modes(c, "blurred_fp_search", || {
        black_box(run_fp_search(&psi, &window, &plan, Some(&blur), &s).unwrap());
    });
    let sampler = ShadowSampler::from_state(&psi, &RegionSpec::prefix(3, N).unwrap()).unwrap();
    modes(c, "shadow_streams", || {
        black_box(sampler.sample_streams(1, 8, 2000));
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
