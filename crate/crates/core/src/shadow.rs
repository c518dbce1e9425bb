//! Classical shadows from random local Pauli measurements.
//!
//! Each sample measures every qubit of a region in a uniformly random Pauli
//! basis. The snapshot `⊗ (3|s_j⟩⟨s_j| - I)` is an unbiased estimate of the
//! region's density matrix. With a register qubit measured in `X` or `Y`, the
//! weighted snapshot `2 i^a b σ` (`a = 0` for `X`, `1` for `Y`, outcome `b`)
//! averages to the register's `|1⟩⟨0|` block, `Tr_R̄ |φ_1⟩⟨φ_0|`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QssError, Result};
use crate::exec;
use crate::linalg::{partial_trace_outer, RegionSpec};
use crate::state::StateVector;

/// Most qubits (region plus register) a sampler will tabulate.
pub const MAX_SHADOW_QUBITS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Self::X => 'X',
            Self::Y => 'Y',
            Self::Z => 'Z',
        }
    }

    /// Columns are the `+1` and `-1` eigenvectors.
    fn eigenbasis(self) -> [[C64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            Self::X => [[r(h), r(h)], [r(h), r(-h)]],
            Self::Y => [[r(h), r(h)], [C64::new(0.0, h), C64::new(0.0, -h)]],
            Self::Z => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
        }
    }

    fn matrix(self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Self::X => [[z, o], [o, z]],
            Self::Y => [[z, -i], [i, z]],
            Self::Z => [[o, z], [z, -o]],
        }
    }
}

/// One measurement record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowSample {
    /// Basis per region qubit, in region order.
    pub axes: Vec<PauliAxis>,
    /// `±1` per region qubit.
    pub outcomes: Vec<i8>,
    /// Register basis (`X` or `Y`) and outcome, when a register is present.
    pub register: Option<(PauliAxis, i8)>,
    /// RNG stream that produced the sample.
    pub stream: u64,
}

/// Flat, serializable form of a [`ShadowSample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowRecord {
    pub stream: u64,
    pub index: usize,
    pub axes: String,
    pub outcomes: String,
    pub register_axis: Option<char>,
    pub register_outcome: Option<i8>,
}

/// Tabulated outcome distributions for every measurement setting.
#[derive(Clone, Debug)]
pub struct ShadowSampler {
    rho: DMatrix<C64>,
    k: usize,
    with_register: bool,
    /// Cumulative outcome distribution per setting.
    cdfs: Vec<Vec<f64>>,
}

impl ShadowSampler {
    /// `rho` acts on `k` qubits; with a register it is qubit 0.
    pub fn new(rho: DMatrix<C64>, with_register: bool) -> Result<Self> {
        let dim = rho.nrows();
        if dim != rho.ncols() || !dim.is_power_of_two() || dim < 2 {
            return Err(QssError::Dimension { expected: rho.ncols(), got: dim });
        }
        let k = dim.trailing_zeros() as usize;
        if k > MAX_SHADOW_QUBITS || (with_register && k < 2) {
            return Err(QssError::InvalidParameter(format!(
                "shadow sampler supports 1..={} qubits plus register, got {k}",
                MAX_SHADOW_QUBITS
            )));
        }
        let settings = 3usize.pow(k as u32);
        let cdfs = (0..settings)
            .map(|code| {
                let axes = decode_setting(code, k);
                let v = basis_matrix(&axes);
                let probs = (v.adjoint() * &rho * &v).diagonal();
                let mut acc = 0.0;
                probs
                    .iter()
                    .map(|p| {
                        acc += p.re.max(0.0);
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rho, k, with_register, cdfs })
    }

    /// Sampler for `Tr_R̄ |ψ⟩⟨ψ|`.
    pub fn from_state(state: &StateVector, region: &RegionSpec) -> Result<Self> {
        state.check_dim(1 << region.n_qubits())?;
        Self::new(partial_trace_outer(state.amplitudes(), state.amplitudes(), region), false)
    }

    /// Sampler on register plus `region` for a joint state whose qubit 0 is the
    /// register and whose qubits `1..` are the system; `region` indexes the system.
    pub fn from_register_state(joint: &StateVector, region: &RegionSpec) -> Result<Self> {
        let n = region.n_qubits();
        joint.check_dim(1 << (n + 1))?;
        let mut qubits = vec![0];
        qubits.extend(region.qubits().iter().map(|q| q + 1));
        let r = RegionSpec::new(qubits, n + 1)?;
        Self::new(partial_trace_outer(joint.amplitudes(), joint.amplitudes(), &r), true)
    }

    pub fn density_matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn has_register(&self) -> bool {
        self.with_register
    }

    /// Region qubits, excluding the register.
    pub fn region_len(&self) -> usize {
        self.k - usize::from(self.with_register)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, stream: u64) -> ShadowSample {
        let mut axes = Vec::with_capacity(self.k);
        if self.with_register {
            axes.push(PauliAxis::from_index(rng.gen_range(0..2)));
        }
        while axes.len() < self.k {
            axes.push(PauliAxis::from_index(rng.gen_range(0..3)));
        }
        let code = axes.iter().fold(0, |acc, a| acc * 3 + a.index());
        let cdf = &self.cdfs[code];
        let u = rng.gen::<f64>() * cdf[cdf.len() - 1];
        let b = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let mut outcomes: Vec<i8> = (0..self.k)
            .map(|j| if (b >> (self.k - 1 - j)) & 1 == 0 { 1 } else { -1 })
            .collect();
        let register = if self.with_register {
            let a = axes.remove(0);
            Some((a, outcomes.remove(0)))
        } else {
            None
        };
        ShadowSample { axes, outcomes, register, stream }
    }

    /// `count` samples from one seeded stream.
    pub fn sample_stream(&self, seed: u64, stream: u64, count: usize) -> Vec<ShadowSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..count).map(|_| self.sample(&mut rng, stream)).collect()
    }

    /// `streams × per_stream` samples, one independent stream per worker item.
    /// The result does not depend on the execution mode.
    pub fn sample_streams(&self, seed: u64, streams: u64, per_stream: usize) -> Vec<ShadowSample> {
        let ids: Vec<u64> = (0..streams).collect();
        exec::map_items(&ids, |&s| self.sample_stream(seed, s, per_stream))
            .into_iter()
            .flatten()
            .collect()
    }

    /// Exact expectation of the estimator, averaging snapshots over every
    /// setting and outcome with their true probabilities.
    pub fn exact_mean(&self) -> DMatrix<C64> {
        let dim_r = 1usize << self.region_len();
        let mut acc = DMatrix::<C64>::zeros(dim_r, dim_r);
        let reg_choices = if self.with_register { 2 } else { 1 };
        let weight_settings = 1.0 / (3f64.powi(self.region_len() as i32) * reg_choices as f64);
        for (code, cdf) in self.cdfs.iter().enumerate() {
            let all_axes = decode_setting(code, self.k);
            if self.with_register && all_axes[0] == PauliAxis::Z {
                continue;
            }
            for (b, p) in cdf.iter().scan(0.0, |prev, &c| {
                let p = c - *prev;
                *prev = c;
                Some(p)
            })
            .enumerate()
            {
                if p == 0.0 {
                    continue;
                }
                let outcomes: Vec<i8> =
                    (0..self.k).map(|j| if (b >> (self.k - 1 - j)) & 1 == 0 { 1 } else { -1 }).collect();
                let s = if self.with_register {
                    ShadowSample {
                        axes: all_axes[1..].to_vec(),
                        outcomes: outcomes[1..].to_vec(),
                        register: Some((all_axes[0], outcomes[0])),
                        stream: 0,
                    }
                } else {
                    ShadowSample { axes: all_axes.clone(), outcomes, register: None, stream: 0 }
                };
                acc += estimator(&s) * C64::new(p * weight_settings, 0.0);
            }
        }
        acc
    }
}

fn decode_setting(mut code: usize, k: usize) -> Vec<PauliAxis> {
    let mut axes = vec![PauliAxis::Z; k];
    for j in (0..k).rev() {
        axes[j] = PauliAxis::from_index(code % 3);
        code /= 3;
    }
    axes
}

fn kron_all(factors: impl Iterator<Item = [[C64; 2]; 2]>) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(1, 1);
    for f in factors {
        let f = DMatrix::from_fn(2, 2, |i, j| f[i][j]);
        m = m.kronecker(&f);
    }
    m
}

fn basis_matrix(axes: &[PauliAxis]) -> DMatrix<C64> {
    kron_all(axes.iter().map(|a| a.eigenbasis()))
}

/// `⊗_j (3|s_j⟩⟨s_j| - I) = ⊗_j (I + 3 b_j σ_j)/2`.
pub fn snapshot(axes: &[PauliAxis], outcomes: &[i8]) -> DMatrix<C64> {
    kron_all(axes.iter().zip(outcomes).map(|(a, &b)| {
        let s = a.matrix();
        let b = 1.5 * f64::from(b);
        let one = C64::new(0.5, 0.0);
        [[one + s[0][0] * b, s[0][1] * b], [s[1][0] * b, one + s[1][1] * b]]
    }))
}

/// Single-sample estimator: the snapshot, weighted by `2 i^a b` when a
/// register was measured.
pub fn estimator(sample: &ShadowSample) -> DMatrix<C64> {
    let snap = snapshot(&sample.axes, &sample.outcomes);
    match sample.register {
        None => snap,
        Some((axis, b)) => {
            let phase = match axis {
                PauliAxis::X => C64::new(1.0, 0.0),
                PauliAxis::Y => C64::new(0.0, 1.0),
                PauliAxis::Z => panic!("register is measured in X or Y"),
            };
            snap * (phase * 2.0 * f64::from(b))
        }
    }
}

/// Mean estimator over samples.
pub fn shadow_reconstruct(samples: &[ShadowSample]) -> DMatrix<C64> {
    shadow_reconstruct_with_stderr(samples).0
}

/// Mean estimator and per-entry standard errors; the error matrix stores the
/// real-part error in `re` and the imaginary-part error in `im`.
pub fn shadow_reconstruct_with_stderr(samples: &[ShadowSample]) -> (DMatrix<C64>, DMatrix<C64>) {
    assert!(!samples.is_empty(), "no shadow samples");
    let dim = 1usize << samples[0].axes.len();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    let mut sq = DMatrix::<C64>::zeros(dim, dim);
    for s in samples {
        let e = estimator(s);
        sq += e.map(|z| C64::new(z.re * z.re, z.im * z.im));
        sum += e;
    }
    let n = samples.len() as f64;
    let mean = sum / C64::new(n, 0.0);
    let err = DMatrix::from_fn(dim, dim, |i, j| {
        let m = mean[(i, j)];
        let v = sq[(i, j)] / n;
        let var = |second: f64, first: f64| ((second - first * first).max(0.0) * n / (n - 1.0).max(1.0) / n).sqrt();
        C64::new(var(v.re, m.re), var(v.im, m.im))
    });
    (mean, err)
}

/// Mean and standard error of `Tr(O σ̂)` for a local operator `O` on the region.
pub fn estimate_local(samples: &[ShadowSample], local: &DMatrix<C64>) -> (C64, C64) {
    let vals: Vec<C64> = samples.iter().map(|s| (local * estimator(s)).trace()).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<C64>() / n;
    let (vr, vi) = vals.iter().fold((0.0, 0.0), |(a, b), v| {
        (a + (v.re - mean.re).powi(2), b + (v.im - mean.im).powi(2))
    });
    let denom = (n - 1.0).max(1.0) * n;
    (mean, C64::new((vr / denom).sqrt(), (vi / denom).sqrt()))
}

impl ShadowSample {
    pub fn to_record(&self, index: usize) -> ShadowRecord {
        let pm = |b: i8| if b > 0 { '+' } else { '-' };
        ShadowRecord {
            stream: self.stream,
            index,
            axes: self.axes.iter().map(|a| a.as_char()).collect(),
            outcomes: self.outcomes.iter().map(|&b| pm(b)).collect(),
            register_axis: self.register.map(|(a, _)| a.as_char()),
            register_outcome: self.register.map(|(_, b)| b),
        }
    }
}

/// CSV with columns `stream,index,axes,outcomes,register_axis,register_outcome`.
pub fn write_samples_csv<W: Write>(samples: &[ShadowSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "stream,index,axes,outcomes,register_axis,register_outcome")?;
    for (i, s) in samples.iter().enumerate() {
        let r = s.to_record(i);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.stream,
            r.index,
            r.axes,
            r.outcomes,
            r.register_axis.map(String::from).unwrap_or_default(),
            r.register_outcome.map(|b| b.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
