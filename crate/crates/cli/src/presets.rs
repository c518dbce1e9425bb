//! Built-in configurations for the four figure panels at reduced size.
//!
//! Window centers and widths are scaled by `√(N/18)` so they keep the same
//! position relative to the energy spread `√⟨H²⟩ ∝ √N` as at eighteen sites.

use clap::ValueEnum;
use serde::Serialize;

use crate::config::{
    AnalysisConfig, BlurConfig, BlurName, ExperimentConfig, Grid, ModelConfig, PopulationsConfig, SearchConfig,
    WindowEntry, WindowSpec, SCHEMA_VERSION,
};

/// System size of every preset.
pub const PRESET_N: usize = 10;

/// Blur factors swept by `fig2b`.
pub const FIG2B_B: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Eigenstate populations of five prepared windows.
    Fig2a,
    /// Infidelity and failure probability against the blur.
    Fig2b,
    /// `⟨Z⟩` of window states from several initial states.
    Fig2c,
    /// Half-chain entanglement entropy against window width.
    Fig2d,
}

impl Preset {
    pub fn all() -> [Preset; 4] {
        [Self::Fig2a, Self::Fig2b, Self::Fig2c, Self::Fig2d]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig2c => "fig2c",
            Self::Fig2d => "fig2d",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Self::Fig2a => "populations of five windows E_A = -6..6 (scaled), W_A = 1 (scaled), b = 1",
            Self::Fig2b => "W_A = 1..5 (scaled) x b in {0.25, 0.5, 1, 2, 4}: 1-F and p_fail against B/W_A",
            Self::Fig2c => "<Z> of projected window states at E_A = 0 for five initial <Z>",
            Self::Fig2d => "half-chain entropy of projected window states at E_A = 0, <Z> = -0.5",
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let n = PRESET_N;
        let c = ExperimentConfig::width_scale(n);
        let centered = |widths: &[f64]| {
            WindowSpec::Explicit(widths.iter().map(|&w| WindowEntry { center: 0.0, width: w * c }).collect())
        };
        let shrinking = [8.0, 4.0, 2.0, 1.0, 0.5];
        let (initial_z, windows, blur, analysis) = match self {
            Self::Fig2a => (
                vec![0.0],
                WindowSpec::Explicit(
                    [-6.0, -3.0, 0.0, 3.0, 6.0].iter().map(|&e| WindowEntry { center: e * c, width: c }).collect(),
                ),
                BlurConfig::Smoothed { b: Grid::One(1.0), h_smooth: 8.0 },
                AnalysisConfig { populations: Some(PopulationsConfig { bin_width: 0.25 * c }), ..Default::default() },
            ),
            Self::Fig2b => (
                vec![0.0],
                centered(&[1.0, 2.0, 3.0, 4.0, 5.0]),
                BlurConfig::Smoothed { b: Grid::Many(FIG2B_B.to_vec()), h_smooth: 8.0 },
                AnalysisConfig { fidelity_sweep: true, ..Default::default() },
            ),
            Self::Fig2c => (
                vec![-0.5, -0.25, 0.0, 0.25, 0.5],
                centered(&shrinking),
                BlurConfig::Named(BlurName::Ideal),
                AnalysisConfig { expectations: true, ..Default::default() },
            ),
            Self::Fig2d => (
                vec![-0.5],
                centered(&shrinking),
                BlurConfig::Named(BlurName::Ideal),
                AnalysisConfig { expectations: true, entropy: true, ..Default::default() },
            ),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            model: ModelConfig { n, g: -1.05, h: 0.5 },
            initial_z,
            windows,
            blur,
            search: SearchConfig { delta_sq: 1e-3, p_star_factor: 0.1 },
            analysis,
            seed: 0,
            output: format!("out/{}", self.name()).into(),
            fault: None,
        }
    }
}
