//! The `run` pipeline. Everything is computed in memory first and written
//! only once the whole experiment succeeded.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use qss_core::analysis::{half_chain_entropy, offdiag_element_exact, project_onto_window, BranchPreparation};
use qss_core::dynamics::{
    exact_rdm, expectation_time_series, full_trace_distance, partition_windows, qss_decompose, trace_distance_bound,
    RdmReconstruction,
};
use qss_core::exec::{self, Execution};
use qss_core::filter::{blur_params, BlurSpec};
use qss_core::linalg::{trace_distance, RegionSpec};
use qss_core::observable::Observable;
use qss_core::product::{product_state, solve_bloch, BlochVector};
use qss_core::search::{p_star_preset, run_fp_search, search_degree, PreparationResult, SearchMode, SearchPlan};
use qss_core::shadow::{shadow_reconstruct_with_stderr, write_samples_csv, ShadowSampler};
use qss_core::spectral::ising_spectrum;
use qss_core::{EnergyWindow, QssError, Spectrum, StateVector};

use crate::config::{ExperimentConfig, WindowSpec, SCHEMA_VERSION};
use crate::error::CliError;
use crate::manifest::*;
use crate::table::{num, opt_num, Table};

/// Population error allowed on top of `Δ²` for rounding.
const GUARANTEE_SLACK: f64 = 1e-12;

/// Files keyed by name, plus the manifest that describes them.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub files: BTreeMap<String, Vec<u8>>,
    pub manifest: Manifest,
}

impl Outputs {
    pub fn violations(&self) -> usize {
        self.manifest.invariants.iter().filter(|i| !i.passed).count()
    }

    /// Write every file into `dir`, the manifest last.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&self.manifest).map_err(std::io::Error::other)?;
        json.push(b'\n');
        std::fs::write(dir.join("manifest.json"), json)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Ideal,
    /// Index into the window's blur list.
    Blurred(usize),
}

#[derive(Clone, Copy, Debug)]
struct Task {
    state: usize,
    window: usize,
    mode: Mode,
}

struct Prepared {
    window: EnergyWindow,
    plan_ideal: SearchPlan,
    plan_blurred: SearchPlan,
    blurs: Vec<BlurSpec>,
}

/// `(B/W_A, 1 - F, p_fail)` of one blurred run.
type SweepPoint = (f64, f64, f64);

struct Run {
    task: Task,
    result: PreparationResult,
}

/// Run the experiment with `jobs` worker threads (`None`: one per core).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Outputs, CliError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start {jobs:?} workers: {e}")))?;
    let mode = if pool.current_num_threads() > 1 { exec::mode() } else { Execution::Sequential };
    pool.install(|| exec::with_mode(mode, || Experiment::new(cfg)?.run()))
}

struct Experiment<'a> {
    cfg: &'a ExperimentConfig,
    spectrum: Spectrum,
    blochs: Vec<BlochVector>,
    states: Vec<StateVector>,
    windows: Vec<Prepared>,
    partition: bool,
}

impl<'a> Experiment<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        let params = cfg.model.params();
        // cheap feasibility checks before the diagonalization
        let blochs = cfg.initial_z.iter().map(|&z| solve_bloch(z, &params)).collect::<Result<Vec<_>, _>>()?;
        log::info!("diagonalizing N = {} ({} levels)", params.n, params.dim());
        let spectrum = ising_spectrum(&params)?;
        let states = blochs.iter().map(|b| product_state(b, params.n)).collect();
        let (entries, partition) = match &cfg.windows {
            WindowSpec::Explicit(ws) => (ws.iter().map(|w| EnergyWindow::new(w.center, w.width)).collect::<Result<Vec<_>, _>>()?, false),
            WindowSpec::Partition { width } => (partition_windows(&spectrum, *width)?.windows().to_vec(), true),
        };
        let delta = cfg.search.delta();
        let windows = entries
            .into_iter()
            .map(|window| {
                let p_star = p_star_preset(window.width, &params, cfg.search.p_star_factor);
                let d = search_degree(delta, p_star);
                let blurs = match cfg.blur.h_smooth() {
                    None => Vec::new(),
                    Some(h) => cfg
                        .blur
                        .b_values()
                        .iter()
                        .map(|&b| {
                            let spec = blur_params(delta, d, spectrum.tau(), b, h)?;
                            let widening = spec.h_smooth * spec.blur;
                            if widening >= window.width {
                                return Err(QssError::BlurTooWide { widening, width: window.width });
                            }
                            Ok(spec)
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                };
                Ok(Prepared {
                    window,
                    plan_ideal: SearchPlan::with_degree(delta, p_star, d, SearchMode::Ideal)?,
                    plan_blurred: SearchPlan::with_degree(delta, p_star, d, SearchMode::Blurred)?,
                    blurs,
                })
            })
            .collect::<Result<Vec<_>, QssError>>()?;
        Ok(Self { cfg, spectrum, blochs, states, windows, partition })
    }

    fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for state in 0..self.states.len() {
            for (window, w) in self.windows.iter().enumerate() {
                tasks.push(Task { state, window, mode: Mode::Ideal });
                tasks.extend((0..w.blurs.len()).map(|k| Task { state, window, mode: Mode::Blurred(k) }));
            }
        }
        tasks
    }

    fn execute(&self, t: &Task) -> Result<PreparationResult, QssError> {
        let w = &self.windows[t.window];
        let psi = &self.states[t.state];
        match t.mode {
            Mode::Ideal => run_fp_search(psi, &w.window, &w.plan_ideal, None, &self.spectrum),
            Mode::Blurred(k) => run_fp_search(psi, &w.window, &w.plan_blurred, Some(&w.blurs[k]), &self.spectrum),
        }
    }

    fn blur_of(&self, t: &Task) -> Option<&BlurSpec> {
        match t.mode {
            Mode::Ideal => None,
            Mode::Blurred(k) => Some(&self.windows[t.window].blurs[k]),
        }
    }

    fn run(self) -> Result<Outputs, CliError> {
        let tasks = self.tasks();
        let results: Vec<Result<PreparationResult, QssError>> = tasks.par_iter().map(|t| self.execute(t)).collect();
        let mut runs = Vec::new();
        let mut skipped = Vec::new();
        for (task, r) in tasks.into_iter().zip(results) {
            match r {
                Ok(result) => runs.push(Run { task, result }),
                Err(QssError::EmptyWindow { p_a }) if self.partition => {
                    if task.mode == Mode::Ideal {
                        skipped.push(SkippedRun { state: task.state, window: task.window, p_a });
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }

        let mut files = BTreeMap::new();
        let mut invariants = self.search_invariants(&runs);
        files.insert("runs.csv".to_string(), self.runs_table(&runs).to_bytes());
        if let Some(p) = &self.cfg.analysis.populations {
            files.insert("populations.csv".to_string(), self.populations_table(&runs, p.bin_width)?.to_bytes());
        }
        let mut fits = Vec::new();
        if self.cfg.analysis.fidelity_sweep {
            let (table, f) = self.fidelity_table(&runs);
            files.insert("fidelity.csv".to_string(), table.to_bytes());
            fits = f;
        }
        if self.cfg.analysis.expectations || self.cfg.analysis.entropy {
            let (expect, entropy) = self.state_tables(&runs)?;
            if self.cfg.analysis.expectations {
                files.insert("expectations.csv".to_string(), expect.to_bytes());
            }
            if self.cfg.analysis.entropy {
                files.insert("entropy.csv".to_string(), entropy.to_bytes());
            }
        }
        let mut dynamics = Vec::new();
        if self.cfg.analysis.dynamics.is_some() {
            let (info, inv) = self.dynamics(&mut files)?;
            dynamics = info;
            invariants.extend(inv);
        }
        let mut shadows = None;
        if self.cfg.analysis.shadows.is_some() {
            shadows = Some(self.shadows(&mut files)?);
        }

        let mut names: Vec<String> = files.keys().cloned().collect();
        names.push("manifest.json".into());
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            generator: format!("qss {}", env!("CARGO_PKG_VERSION")),
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            model: self.model_info(),
            search: SearchInfo {
                delta_sq: self.cfg.search.delta_sq,
                delta: self.cfg.search.delta(),
                p_star_factor: self.cfg.search.p_star_factor,
            },
            states: self.state_info(),
            windows: self.window_info(),
            skipped,
            fits,
            dynamics,
            shadows,
            invariants,
            files: names,
        };
        Ok(Outputs { files, manifest })
    }

    fn model_info(&self) -> ModelInfo {
        let p = self.cfg.model.params();
        let e = self.spectrum.eigenvalues();
        ModelInfo {
            n: p.n,
            g: p.g,
            h: p.h,
            dim: self.spectrum.dim(),
            tau: self.spectrum.tau(),
            e_min: e[0],
            e_max: e[e.len() - 1],
            wrap_phase: self.spectrum.bandwidth() * self.spectrum.tau(),
            energy_variance: p.product_state_variance(),
        }
    }

    fn state_info(&self) -> Vec<StateInfo> {
        self.blochs
            .iter()
            .zip(&self.states)
            .enumerate()
            .map(|(index, (b, psi))| {
                let (energy, energy_variance) = self.spectrum.energy_moments(psi);
                StateInfo { index, z: b.z, x: b.x, y: b.y, energy, energy_variance }
            })
            .collect()
    }

    fn window_info(&self) -> Vec<WindowInfo> {
        self.windows
            .iter()
            .enumerate()
            .map(|(index, w)| WindowInfo {
                index,
                center: w.window.center,
                width: w.window.width,
                p_star: w.plan_ideal.p_star,
                d: w.plan_ideal.d,
                phases: w.plan_ideal.phases.clone(),
                blur: w
                    .blurs
                    .iter()
                    .zip(self.cfg.blur.b_values())
                    .map(|(s, b)| BlurInfo { b, blur: s.blur, h_smooth: s.h_smooth, d_prime: s.d_prime, eta: s.eta })
                    .collect(),
            })
            .collect()
    }

    fn search_invariants(&self, runs: &[Run]) -> Vec<InvariantRecord> {
        let delta_sq = self.cfg.search.delta_sq;
        let guaranteed = runs
            .iter()
            .filter(|r| r.task.mode == Mode::Ideal && r.result.p_a >= self.windows[r.task.window].plan_ideal.p_star);
        let rises = runs.iter().map(|r| {
            let s = &r.result.step_norms;
            let rise = s.windows(2).map(|x| x[1] - x[0]).fold(f64::NEG_INFINITY, f64::max);
            rise.max(s.iter().copied().fold(0.0, f64::max) - 1.0)
        });
        vec![
            InvariantRecord::at_most(
                "fp_guarantee: population error of ideal runs with p_A >= p*",
                guaranteed.map(|r| r.result.population_error),
                delta_sq + GUARANTEE_SLACK,
            ),
            InvariantRecord::at_most("contraction: largest rise of the success amplitude", rises, 1e-12),
            InvariantRecord::at_most(
                "normalization: | |output| - 1 |",
                runs.iter().map(|r| (r.result.state.norm() - 1.0).abs()),
                1e-10,
            ),
        ]
    }

    fn row_prefix(&self, t: &Task) -> Vec<String> {
        let w = &self.windows[t.window].window;
        let (mode, b) = match t.mode {
            Mode::Ideal => ("ideal", String::new()),
            Mode::Blurred(k) => ("blurred", num(self.cfg.blur.b_values()[k])),
        };
        vec![
            t.state.to_string(),
            num(self.cfg.initial_z[t.state]),
            t.window.to_string(),
            num(w.center),
            num(w.width),
            mode.to_string(),
            b,
        ]
    }

    fn runs_table(&self, runs: &[Run]) -> Table {
        let mut t = Table::new(&[
            "state", "z0", "window", "E_A", "W_A", "mode", "b", "B", "h_smooth", "d", "d_prime", "eta", "tau", "p_star",
            "p_A", "success_prob", "p_fail", "population_error", "fidelity", "one_minus_fidelity", "q_H", "q_psi",
        ]);
        for r in runs {
            let blur = self.blur_of(&r.task);
            let plan = &self.windows[r.task.window].plan_ideal;
            let res = &r.result;
            let mut row = self.row_prefix(&r.task);
            row.extend([
                opt_num(blur.map(|b| b.blur)),
                opt_num(blur.map(|b| b.h_smooth)),
                plan.d.to_string(),
                blur.map(|b| b.d_prime.to_string()).unwrap_or_default(),
                opt_num(blur.map(|b| b.eta)),
                num(self.spectrum.tau()),
                num(plan.p_star),
                num(res.p_a),
                num(res.success_prob),
                num(res.failure_prob()),
                num(res.population_error),
                num(res.fidelity_vs_ideal),
                num(1.0 - res.fidelity_vs_ideal),
                res.q_h.to_string(),
                res.q_psi.to_string(),
            ]);
            t.push(row);
        }
        t
    }

    fn populations_table(&self, runs: &[Run], bin_width: f64) -> Result<Table, CliError> {
        let bins = partition_windows(&self.spectrum, bin_width)?;
        let initial: Vec<Vec<f64>> =
            self.states.iter().map(|psi| bins.weights(&self.spectrum.to_energy_basis(psi))).collect();
        let mut t = Table::new(&[
            "state", "z0", "window", "E_A", "W_A", "mode", "b", "bin", "bin_center", "initial", "prepared",
        ]);
        for r in runs {
            let prepared = bins.weights(&r.result.energy_coeffs);
            let prefix = self.row_prefix(&r.task);
            for (k, bin) in bins.windows().iter().enumerate() {
                let mut row = prefix.clone();
                row.extend([k.to_string(), num(bin.center), num(initial[r.task.state][k]), num(prepared[k])]);
                t.push(row);
            }
        }
        Ok(t)
    }

    fn fidelity_table(&self, runs: &[Run]) -> (Table, Vec<FitInfo>) {
        let mut t = Table::new(&[
            "state", "z0", "window", "E_A", "W_A", "b", "B", "B_over_W", "one_minus_fidelity", "p_fail",
        ]);
        let mut groups: BTreeMap<(usize, usize), Vec<SweepPoint>> = BTreeMap::new();
        for r in runs {
            let Some(blur) = self.blur_of(&r.task) else { continue };
            let w = self.windows[r.task.window].window;
            let x = blur.blur / w.width;
            let (infid, fail) = (1.0 - r.result.fidelity_vs_ideal, r.result.failure_prob());
            let mut row = self.row_prefix(&r.task);
            row.remove(5);
            row.extend([num(blur.blur), num(x), num(infid), num(fail)]);
            t.push(row);
            groups.entry((r.task.state, r.task.window)).or_default().push((x, infid, fail));
        }
        let fit = |state, window, pts: &[SweepPoint]| FitInfo {
            state,
            window,
            points: pts.len(),
            slope_infidelity: log_slope(pts.iter().map(|p| (p.0, p.1))),
            slope_failure: log_slope(pts.iter().map(|p| (p.0, p.2))),
        };
        let mut fits: Vec<FitInfo> = groups.iter().map(|(&(s, w), pts)| fit(s, Some(w), pts)).collect();
        for s in 0..self.states.len() {
            let pooled: Vec<_> = groups.iter().filter(|(k, _)| k.0 == s).flat_map(|(_, v)| v.iter().copied()).collect();
            fits.push(fit(s, None, &pooled));
        }
        (t, fits)
    }

    fn state_tables(&self, runs: &[Run]) -> Result<(Table, Table), CliError> {
        const HEAD: [&str; 8] = ["state", "z0", "window", "E_A", "W_A", "kind", "b", "p_A"];
        let mut expect = Table::new(&[&HEAD[..], &["mean_z", "z_site0"]].concat());
        let mut entropy = Table::new(&[&HEAD[..], &["n", "entropy", "entropy_per_site"]].concat());
        // projector states first, then every prepared state
        let mut items: Vec<(Vec<String>, StateVector)> = Vec::new();
        for (s, psi) in self.states.iter().enumerate() {
            for (w, prep) in self.windows.iter().enumerate() {
                let (target, p_a) = match project_onto_window(psi, &prep.window, &self.spectrum) {
                    Ok(x) => x,
                    Err(QssError::EmptyWindow { .. }) if self.partition => continue,
                    Err(e) => return Err(e.into()),
                };
                let mut pre = self.row_prefix(&Task { state: s, window: w, mode: Mode::Ideal });
                pre[5] = "projector".into();
                pre.push(num(p_a));
                items.push((pre, target));
            }
        }
        for r in runs {
            let mut pre = self.row_prefix(&r.task);
            pre.push(num(r.result.p_a));
            items.push((pre, r.result.state.clone()));
        }
        let n = self.cfg.model.n;
        let want_entropy = self.cfg.analysis.entropy;
        let rows: Vec<Result<(f64, f64, f64), QssError>> = items
            .par_iter()
            .map(|(_, v)| {
                let mz = Observable::MeanZ.matrix_element(v, v).re;
                let z0 = Observable::PauliZ(0).matrix_element(v, v).re;
                let s = if want_entropy { half_chain_entropy(v)? } else { f64::NAN };
                Ok((mz, z0, s))
            })
            .collect();
        for ((pre, _), r) in items.iter().zip(rows) {
            let (mz, z0, s) = r?;
            let mut a = pre.clone();
            a.extend([num(mz), num(z0)]);
            expect.push(a);
            if want_entropy {
                let mut b = pre.clone();
                b.extend([n.to_string(), num(s), num(s / n as f64)]);
                entropy.push(b);
            }
        }
        Ok((expect, entropy))
    }

    fn dynamics(&self, files: &mut BTreeMap<String, Vec<u8>>) -> Result<(Vec<DynamicsInfo>, Vec<InvariantRecord>), CliError> {
        let d = self.cfg.analysis.dynamics.as_ref().expect("dynamics configured");
        let width = d.width.unwrap_or_else(|| match self.cfg.windows {
            WindowSpec::Partition { width } => width,
            WindowSpec::Explicit(_) => unreachable!("validated"),
        });
        let n = self.cfg.model.n;
        let region = RegionSpec::new(d.region.clone(), n)?;
        let observable = Observable::PauliZ(d.site);
        let times: Vec<f64> = (0..=d.steps).map(|k| d.t_max * k as f64 / d.steps as f64).collect();
        let part = partition_windows(&self.spectrum, width)?;
        let (mut info, mut completeness, mut obs_excess, mut rdm_excess) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (s, psi) in self.states.iter().enumerate() {
            let decomp = qss_decompose(psi, &part, &self.spectrum, d.weight_floor)?;
            let dropped: f64 = decomp.dropped.iter().map(|x| x.1).sum();
            completeness.push((decomp.total_weight() + dropped - 1.0).abs());
            let series = expectation_time_series(psi, &self.spectrum, &decomp, &observable, &times);
            obs_excess.extend(series.iter().map(|p| (p.exact - p.reconstructed).abs() - p.bound));
            let mut csv = Vec::new();
            qss_core::dynamics::write_time_series_csv(&series, &mut csv)?;

            let rdm = RdmReconstruction::new(&decomp, &region, d.pair_floor)?;
            let rows: Vec<Result<(f64, f64, f64, f64), QssError>> = times
                .par_iter()
                .map(|&t| {
                    let exact = exact_rdm(psi, &self.spectrum, &region, t)?;
                    let dist = trace_distance(&rdm.evaluate(t), &exact);
                    Ok((t, dist, full_trace_distance(psi, &decomp, &self.spectrum, t), trace_distance_bound(width, t)))
                })
                .collect();
            let mut rdm_table = Table::new(&["t", "rdm_distance", "state_distance", "bound"]);
            for r in rows {
                let (t, a, b, bound) = r?;
                rdm_excess.push(a.max(b) - bound);
                rdm_table.push(vec![num(t), num(a), num(b), num(bound)]);
            }

            let weight: BTreeMap<usize, f64> = decomp.components.iter().map(|c| (c.window_index, c.weight)).collect();
            let position: Vec<usize> = decomp.components.iter().map(|c| c.window_index).collect();
            let blocks: Vec<serde_json::Value> = rdm
                .inventory()
                .iter()
                .map(|b| {
                    let (wa, wb) = (position[b.a], position[b.b]);
                    serde_json::json!({
                        "window_a": wa,
                        "window_b": wb,
                        "E_A": b.e_a,
                        "E_A_prime": b.e_b,
                        "p_A": weight[&wa],
                        "p_A_prime": weight[&wb],
                        "frobenius": b.frobenius,
                    })
                })
                .collect();
            let blocks_json = serde_json::json!({
                "state": s,
                "width": width,
                "region": d.region,
                "pair_floor": d.pair_floor,
                "skipped_pairs": rdm.skipped_pairs(),
                "blocks": blocks,
            });
            let (series_file, rdm_file, blocks_file) =
                (format!("dynamics_s{s}.csv"), format!("dynamics_rdm_s{s}.csv"), format!("blocks_s{s}.json"));
            files.insert(series_file.clone(), csv);
            files.insert(rdm_file.clone(), rdm_table.to_bytes());
            let mut bytes = serde_json::to_vec_pretty(&blocks_json).expect("json");
            bytes.push(b'\n');
            files.insert(blocks_file.clone(), bytes);
            info.push(DynamicsInfo {
                state: s,
                width,
                partition_windows: part.len(),
                components: decomp.components.len(),
                dropped_weight: dropped,
                skipped_pairs: rdm.skipped_pairs(),
                series_file,
                rdm_file,
                blocks_file,
            });
        }
        let inv = vec![
            InvariantRecord::at_most("completeness: | sum of window weights - 1 |", completeness, 1e-10),
            InvariantRecord::at_most("expectation_bound: error minus (e^{Wt}-1)|O|", obs_excess, 1e-10),
            InvariantRecord::at_most("trace_distance_bound: distance minus (e^{Wt}-1)", rdm_excess, 1e-10),
        ];
        Ok((info, inv))
    }

    fn shadows(&self, files: &mut BTreeMap<String, Vec<u8>>) -> Result<ShadowInfo, CliError> {
        let sh = self.cfg.analysis.shadows.as_ref().expect("shadows configured");
        let n = self.cfg.model.n;
        let region = RegionSpec::new(sh.region.clone(), n)?;
        let psi = &self.states[sh.initial];
        let wa = &self.windows[sh.window].window;
        let sampler = match sh.pair_with {
            None => ShadowSampler::from_state(&project_onto_window(psi, wa, &self.spectrum)?.0, &region)?,
            Some(j) => {
                let wb = &self.windows[j].window;
                let od = offdiag_element_exact(psi, wa, wb, &Observable::Identity, &self.spectrum, &BranchPreparation::Projector)?;
                ShadowSampler::from_register_state(&od.joint_state, &region)?
            }
        };
        let samples = sampler.sample_streams(self.cfg.seed, sh.streams, sh.samples_per_stream);
        let (mean, err) = shadow_reconstruct_with_stderr(&samples);
        let exact = sampler.exact_mean();
        let mut t = Table::new(&[
            "seed", "i", "j", "estimate_re", "estimate_im", "stderr_re", "stderr_im", "exact_re", "exact_im",
        ]);
        let mut max_z: f64 = 0.0;
        for i in 0..mean.nrows() {
            for j in 0..mean.ncols() {
                let (m, e, x) = (mean[(i, j)], err[(i, j)], exact[(i, j)]);
                for (dev, s) in [((m - x).re, e.re), ((m - x).im, e.im)] {
                    if s > 0.0 {
                        max_z = max_z.max(dev.abs() / s);
                    }
                }
                t.push(vec![
                    self.cfg.seed.to_string(),
                    i.to_string(),
                    j.to_string(),
                    num(m.re),
                    num(m.im),
                    num(e.re),
                    num(e.im),
                    num(x.re),
                    num(x.im),
                ]);
            }
        }
        let mut csv = Vec::new();
        write_samples_csv(&samples, &mut csv)?;
        files.insert("shadow_samples.csv".into(), csv);
        files.insert("shadow_estimates.csv".into(), t.to_bytes());
        Ok(ShadowInfo {
            seed: self.cfg.seed,
            initial: sh.initial,
            window: sh.window,
            pair_with: sh.pair_with,
            region: sh.region.clone(),
            streams: sh.streams,
            samples_per_stream: sh.samples_per_stream,
            max_abs_z: max_z,
        })
    }
}

/// Least-squares slope of `ln y` against `ln x` over points with positive `x` and `y`.
pub fn log_slope(points: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.into_iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AnalysisConfig, DynamicsConfig, PopulationsConfig, ShadowConfig};
    use crate::presets::Preset;

    fn small() -> ExperimentConfig {
        let mut c = Preset::Fig2a.config();
        c.model.n = 6;
        let s = ExperimentConfig::width_scale(6);
        c.windows = WindowSpec::Explicit(vec![
            crate::config::WindowEntry { center: 0.0, width: 2.0 * s },
            crate::config::WindowEntry { center: 2.0 * s, width: 2.0 * s },
        ]);
        c.analysis = AnalysisConfig {
            populations: Some(PopulationsConfig { bin_width: 0.5 }),
            fidelity_sweep: true,
            expectations: true,
            entropy: true,
            dynamics: Some(DynamicsConfig {
                width: Some(1.0),
                t_max: 0.5,
                steps: 5,
                site: 0,
                region: vec![0, 1],
                weight_floor: 1e-12,
                pair_floor: 1e-12,
            }),
            shadows: Some(ShadowConfig {
                region: vec![0],
                streams: 2,
                samples_per_stream: 50,
                initial: 0,
                window: 0,
                pair_with: Some(1),
            }),
        };
        c
    }

    #[test]
    fn small_run_produces_every_table() {
        let out = run_experiment(&small(), Some(1)).unwrap();
        for f in [
            "runs.csv",
            "populations.csv",
            "fidelity.csv",
            "expectations.csv",
            "entropy.csv",
            "dynamics_s0.csv",
            "dynamics_rdm_s0.csv",
            "blocks_s0.json",
            "shadow_samples.csv",
            "shadow_estimates.csv",
        ] {
            assert!(out.files.contains_key(f), "{f}");
        }
        assert_eq!(out.violations(), 0, "{:#?}", out.manifest.invariants);
        let runs = String::from_utf8(out.files["runs.csv"].clone()).unwrap();
        // two windows, ideal plus one blur each
        assert_eq!(runs.lines().count(), 1 + 4);
        let m = &out.manifest;
        assert_eq!(m.windows.len(), 2);
        assert_eq!(m.windows[0].blur.len(), 1);
        assert!(m.files.contains(&"manifest.json".to_string()));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut c = small();
        c.analysis.dynamics = None;
        let a = run_experiment(&c, Some(1)).unwrap();
        let b = run_experiment(&c, Some(3)).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn empty_explicit_window_is_infeasible() {
        let mut c = small();
        c.analysis = AnalysisConfig::default();
        c.windows = WindowSpec::Explicit(vec![crate::config::WindowEntry { center: 1e3, width: 1.0 }]);
        assert_eq!(run_experiment(&c, Some(1)).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn infeasible_z_is_rejected() {
        let mut c = small();
        c.initial_z = vec![0.99];
        assert!(matches!(run_experiment(&c, Some(1)), Err(CliError::Infeasible(QssError::InfeasibleBloch { .. }))));
    }

    #[test]
    fn partition_windows_skip_empty_bins() {
        let mut c = small();
        c.analysis = AnalysisConfig::default();
        c.blur = crate::config::BlurConfig::Named(crate::config::BlurName::Ideal);
        c.windows = WindowSpec::Partition { width: 1.0 };
        let out = run_experiment(&c, Some(1)).unwrap();
        let m = &out.manifest;
        let runs = String::from_utf8(out.files["runs.csv"].clone()).unwrap().lines().count() - 1;
        assert_eq!(runs + m.skipped.len(), m.windows.len());
        assert_eq!(out.violations(), 0);
    }

    #[test]
    fn slope_fit() {
        let pts = (1..5).map(|k| (k as f64, 3.0 * (k as f64).powf(0.5)));
        assert!((log_slope(pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(log_slope([(1.0, 1.0)]), None);
        assert_eq!(log_slope([(1.0, 0.0), (2.0, 1.0)]), None);
    }
}
