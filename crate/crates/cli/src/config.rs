//! Experiment configuration: a versioned JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qss_core::spectral::MAX_DENSE_QUBITS;
use qss_core::IsingParams;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest system the invariant suite accepts.
pub const VERIFY_MAX_QUBITS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    /// `⟨Z⟩` of each zero-energy product state to start from.
    pub initial_z: Vec<f64>,
    pub windows: WindowSpec,
    pub blur: BlurConfig,
    pub search: SearchConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
    /// Not echoed into outputs, so results do not depend on where they land.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
    /// Test fixture: deliberately break one component in `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_h")]
    pub h: f64,
}

fn default_g() -> f64 {
    -1.05
}

fn default_h() -> f64 {
    0.5
}

impl ModelConfig {
    pub fn params(&self) -> IsingParams {
        IsingParams::new(self.n, self.g, self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowEntry {
    pub center: f64,
    pub width: f64,
}

/// Either explicit windows or a partition of the spectrum into bins of one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    Explicit(Vec<WindowEntry>),
    Partition { width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurName {
    Ideal,
}

/// A single value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(x) => vec![*x],
            Self::Many(v) => v.clone(),
        }
    }
}

/// `"ideal"` for exact reflections, or the blur factor(s) `b` and smoothing `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlurConfig {
    Named(BlurName),
    Smoothed {
        b: Grid,
        #[serde(default = "default_h_smooth")]
        h_smooth: f64,
    },
}

fn default_h_smooth() -> f64 {
    qss_core::filter::DEFAULT_H_SMOOTH
}

impl BlurConfig {
    /// Blur factors to sweep; empty for ideal reflections.
    pub fn b_values(&self) -> Vec<f64> {
        match self {
            Self::Named(BlurName::Ideal) => Vec::new(),
            Self::Smoothed { b, .. } => b.values(),
        }
    }

    pub fn h_smooth(&self) -> Option<f64> {
        match self {
            Self::Named(_) => None,
            Self::Smoothed { h_smooth, .. } => Some(*h_smooth),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// `Δ²`, the tolerated population error.
    pub delta_sq: f64,
    /// Prefactor in `p* = factor · W_A / √⟨H²⟩`.
    #[serde(default = "default_p_star_factor")]
    pub p_star_factor: f64,
}

fn default_p_star_factor() -> f64 {
    0.1
}

impl SearchConfig {
    pub fn delta(&self) -> f64 {
        self.delta_sq.sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<PopulationsConfig>,
    #[serde(default)]
    pub fidelity_sweep: bool,
    /// `⟨Z⟩` of every window state.
    #[serde(default)]
    pub expectations: bool,
    /// Half-chain entanglement entropy of every window state.
    #[serde(default)]
    pub entropy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadows: Option<ShadowConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationsConfig {
    /// Energy bin width of the eigenstate histogram.
    pub bin_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Partition width; defaults to the window partition width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub t_max: f64,
    pub steps: usize,
    /// Site of the `Z` observable.
    #[serde(default)]
    pub site: usize,
    /// Sites kept in the reconstructed reduced density matrix.
    pub region: Vec<usize>,
    #[serde(default = "default_floor")]
    pub weight_floor: f64,
    #[serde(default = "default_floor")]
    pub pair_floor: f64,
}

fn default_floor() -> f64 {
    qss_core::dynamics::DEFAULT_WEIGHT_FLOOR
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowConfig {
    pub region: Vec<usize>,
    pub streams: u64,
    pub samples_per_stream: usize,
    /// Index into `initial_z` of the state to filter.
    #[serde(default)]
    pub initial: usize,
    /// Index into the window list of the state to sample.
    #[serde(default)]
    pub window: usize,
    /// When set, sample the register-assisted off-diagonal block between
    /// `window` and this second window instead of a diagonal state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_with: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Normalize the blurred reflection with the sign-flipped `η`.
    EtaSign,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            let context = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("").trim().to_string();
            CliError::Parse { origin: origin.to_string(), line: e.line(), column: e.column(), message: e.to_string(), context }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Static checks that need no spectrum.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let n = self.model.n;
        if !(2..=MAX_DENSE_QUBITS).contains(&n) {
            return bad(format!("model.n = {n} is outside [2, {MAX_DENSE_QUBITS}]"));
        }
        if !self.model.g.is_finite() || !self.model.h.is_finite() {
            return bad("model.g and model.h must be finite".into());
        }
        if self.model.g == 0.0 {
            return bad("model.g must be nonzero to fix the zero-energy product states".into());
        }
        let s = &self.search;
        if !(s.delta_sq > 0.0 && s.delta_sq < 1.0) {
            return bad(format!("search.delta_sq = {} must lie in (0, 1)", s.delta_sq));
        }
        if !(s.p_star_factor > 0.0 && s.p_star_factor.is_finite()) {
            return bad(format!("search.p_star_factor = {} must be positive", s.p_star_factor));
        }
        if self.initial_z.is_empty() {
            return bad("initial_z must list at least one value".into());
        }
        if let Some(z) = self.initial_z.iter().find(|z| !z.is_finite()) {
            return bad(format!("initial_z entry {z} is not finite"));
        }
        match &self.windows {
            WindowSpec::Explicit(ws) => {
                if ws.is_empty() {
                    return bad("windows.explicit must list at least one window".into());
                }
                for (i, w) in ws.iter().enumerate() {
                    if !(w.width > 0.0 && w.width.is_finite() && w.center.is_finite()) {
                        return bad(format!("window {i} needs a finite center and a positive width"));
                    }
                }
            }
            WindowSpec::Partition { width } => {
                if !(*width > 0.0 && width.is_finite()) {
                    return bad(format!("windows.partition.width = {width} must be positive"));
                }
            }
        }
        if let BlurConfig::Smoothed { b, h_smooth } = &self.blur {
            let b = b.values();
            if b.is_empty() || b.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("blur.b must be one or more positive numbers".into());
            }
            if !(*h_smooth > 0.0 && h_smooth.is_finite()) {
                return bad(format!("blur.h_smooth = {h_smooth} must be positive"));
            }
        }
        let a = &self.analysis;
        if let Some(p) = &a.populations {
            if !(p.bin_width > 0.0 && p.bin_width.is_finite()) {
                return bad("analysis.populations.bin_width must be positive".into());
            }
        }
        if a.fidelity_sweep && self.blur.b_values().is_empty() {
            return bad("analysis.fidelity_sweep needs blurred reflections (blur.b)".into());
        }
        if let Some(d) = &a.dynamics {
            let width = d.width.or(match self.windows {
                WindowSpec::Partition { width } => Some(width),
                WindowSpec::Explicit(_) => None,
            });
            match width {
                Some(w) if w > 0.0 && w.is_finite() => {}
                Some(w) => return bad(format!("analysis.dynamics.width = {w} must be positive")),
                None => return bad("analysis.dynamics.width is required with explicit windows".into()),
            }
            if !(d.t_max >= 0.0 && d.t_max.is_finite()) || d.steps == 0 {
                return bad("analysis.dynamics needs t_max >= 0 and steps >= 1".into());
            }
            if d.site >= n {
                return bad(format!("analysis.dynamics.site = {} is outside 0..{n}", d.site));
            }
            check_region(&d.region, n, "analysis.dynamics.region")?;
            if !(d.weight_floor >= 0.0 && d.pair_floor >= 0.0) {
                return bad("analysis.dynamics floors must be non-negative".into());
            }
        }
        if let Some(sh) = &a.shadows {
            check_region(&sh.region, n, "analysis.shadows.region")?;
            if sh.region.len() > qss_core::shadow::MAX_SHADOW_QUBITS {
                return bad("analysis.shadows.region is too large to tabulate".into());
            }
            if sh.streams == 0 || sh.samples_per_stream == 0 {
                return bad("analysis.shadows needs streams >= 1 and samples_per_stream >= 1".into());
            }
            if sh.initial >= self.initial_z.len() {
                return bad(format!("analysis.shadows.initial = {} is outside initial_z", sh.initial));
            }
            let n_windows = match &self.windows {
                WindowSpec::Explicit(ws) => ws.len(),
                WindowSpec::Partition { .. } => usize::MAX,
            };
            if sh.window >= n_windows || sh.pair_with.is_some_and(|j| j >= n_windows || j == sh.window) {
                return bad("analysis.shadows window indices must name distinct configured windows".into());
            }
        }
        Ok(())
    }

    /// Width rescaling used by the presets, `√(N/18)`.
    pub fn width_scale(n: usize) -> f64 {
        (n as f64 / 18.0).sqrt()
    }
}

fn check_region(region: &[usize], n: usize, what: &str) -> Result<(), CliError> {
    qss_core::linalg::RegionSpec::new(region.to_vec(), n)
        .map(|_| ())
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}
