//! The JSON manifest written next to every set of result tables.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub seed: u64,
    /// The configuration that produced these files, minus the output directory.
    pub config: ExperimentConfig,
    pub model: ModelInfo,
    pub search: SearchInfo,
    pub states: Vec<StateInfo>,
    pub windows: Vec<WindowInfo>,
    /// `(state, window)` pairs with no weight in a partition bin.
    pub skipped: Vec<SkippedRun>,
    pub fits: Vec<FitInfo>,
    pub dynamics: Vec<DynamicsInfo>,
    pub shadows: Option<ShadowInfo>,
    pub invariants: Vec<InvariantRecord>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    #[serde(rename = "N")]
    pub n: usize,
    pub g: f64,
    pub h: f64,
    pub dim: usize,
    pub tau: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// `(E_max - E_min) τ`, at most `2π`.
    pub wrap_phase: f64,
    /// `N (g² + h²)`, the variance entering `p*`.
    pub energy_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchInfo {
    pub delta_sq: f64,
    pub delta: f64,
    pub p_star_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub index: usize,
    pub z: f64,
    pub x: f64,
    pub y: f64,
    /// `⟨H⟩` evaluated on the exact spectrum.
    pub energy: f64,
    /// `⟨H²⟩ - ⟨H⟩²` evaluated on the exact spectrum.
    pub energy_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub index: usize,
    #[serde(rename = "E_A")]
    pub center: f64,
    #[serde(rename = "W_A")]
    pub width: f64,
    pub p_star: f64,
    pub d: usize,
    pub phases: Vec<f64>,
    pub blur: Vec<BlurInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurInfo {
    pub b: f64,
    #[serde(rename = "B")]
    pub blur: f64,
    pub h_smooth: f64,
    pub d_prime: usize,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRun {
    pub state: usize,
    pub window: usize,
    #[serde(rename = "p_A")]
    pub p_a: f64,
}

/// Least-squares log-log slopes over the blur sweep. `window: None` pools every window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub state: usize,
    pub window: Option<usize>,
    pub points: usize,
    pub slope_infidelity: Option<f64>,
    pub slope_failure: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsInfo {
    pub state: usize,
    pub width: f64,
    pub partition_windows: usize,
    pub components: usize,
    pub dropped_weight: f64,
    pub skipped_pairs: usize,
    pub series_file: String,
    pub rdm_file: String,
    pub blocks_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowInfo {
    pub seed: u64,
    pub initial: usize,
    pub window: usize,
    pub pair_with: Option<usize>,
    pub region: Vec<usize>,
    pub streams: u64,
    pub samples_per_stream: usize,
    /// Largest `|estimate - exact| / stderr` over all matrix entries.
    pub max_abs_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub name: String,
    pub passed: bool,
    /// Worst measured value over `count` instances.
    pub value: f64,
    pub limit: f64,
    pub count: usize,
}

impl InvariantRecord {
    /// Passes when the worst value does not exceed `limit`.
    pub fn at_most(name: &str, values: impl IntoIterator<Item = f64>, limit: f64) -> Self {
        let (mut worst, mut count, mut nan) = (f64::NEG_INFINITY, 0, false);
        for v in values {
            nan |= v.is_nan();
            worst = worst.max(v);
            count += 1;
        }
        let value = if nan { f64::NAN } else if count == 0 { 0.0 } else { worst };
        Self { name: name.into(), passed: value <= limit, value, limit, count }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_aggregation() {
        let r = InvariantRecord::at_most("x", [1e-3, 5e-4], 1e-3);
        assert!(r.passed && r.count == 2 && r.value == 1e-3);
        assert!(!InvariantRecord::at_most("x", [2e-3], 1e-3).passed);
        assert!(!InvariantRecord::at_most("x", [f64::NAN, 0.0], 1.0).passed);
        let empty = InvariantRecord::at_most("x", [], 1.0);
        assert!(empty.passed && empty.count == 0);
    }
}
