use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::estimator::TransportTask;
use crate::model::{DragModel, NoiseModel, ThrustProfile, TransportModel};
use crate::redundancy::RedundancyConfig;

/// One experiment, read from a single JSON document. Unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_profile")]
    pub profile: ThrustProfile,
    #[serde(default = "default_gamma")]
    pub gamma: DragModel,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub task: Option<TransportTask>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub fig3: Fig3Options,
}

/// Redundancy orders swept by `sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub modules: Vec<usize>,
    pub periods: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            modules: vec![1],
            periods: vec![1],
        }
    }
}

/// Sweep settings for the figure-reproduction panels. Tolerances are given
/// as fractions of the nominal destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Options {
    /// `[T, N]` pairs whose velocity CDFs are drawn.
    pub e_cells: Vec<[usize; 2]>,
    pub f_modules: Vec<usize>,
    pub f_max_periods: usize,
    pub f_level: f64,
    pub g_tolerances: Vec<f64>,
    pub g_max_modules: usize,
    pub g_periods: usize,
    pub h_b_values: Vec<f64>,
    /// `[tolerance fraction, p0]` pairs.
    pub h_targets: Vec<[f64; 2]>,
    pub h_max_modules: usize,
    pub h_periods: usize,
}

impl Default for Fig3Options {
    fn default() -> Self {
        Fig3Options {
            e_cells: vec![[1, 1], [8, 1], [1, 8], [8, 8]],
            f_modules: vec![1, 8],
            f_max_periods: 16,
            f_level: 0.9,
            g_tolerances: vec![0.05, 0.1, 0.2],
            g_max_modules: 16,
            g_periods: 1,
            h_b_values: (1..=9).map(|i| i as f64 / 10.0).collect(),
            h_targets: vec![[0.1, 0.9], [0.2, 0.8], [0.05, 0.95]],
            h_max_modules: 64,
            h_periods: 1,
        }
    }
}

fn default_profile() -> ThrustProfile {
    ThrustProfile::constant(1.0, 1.0).expect("valid default profile")
}

fn default_gamma() -> DragModel {
    DragModel::new(1.0).expect("valid default drag")
}

fn default_noise() -> NoiseModel {
    NoiseModel::new(0.5).expect("valid default noise")
}

fn default_replicates() -> usize {
    10_000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            profile: default_profile(),
            gamma: default_gamma(),
            noise: default_noise(),
            grid: Grid::default(),
            task: None,
            replicates: default_replicates(),
            seed: 0,
            output_dir: None,
            fig3: Fig3Options::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).context("invalid experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.replicates == 0 {
            bail!("replicates: must be >= 1");
        }
        if self.grid.modules.is_empty() || self.grid.modules.contains(&0) {
            bail!("grid.modules: must be a nonempty list of values >= 1");
        }
        if self.grid.periods.is_empty() || self.grid.periods.contains(&0) {
            bail!("grid.periods: must be a nonempty list of values >= 1");
        }
        let f = &self.fig3;
        if f.e_cells.iter().any(|c| c[0] == 0 || c[1] == 0) {
            bail!("fig3.e_cells: T and N must be >= 1");
        }
        if f.f_modules.contains(&0) || f.f_max_periods == 0 {
            bail!("fig3.f_modules/f_max_periods: must be >= 1");
        }
        if !(f.f_level > 0.0 && f.f_level < 1.0) {
            bail!("fig3.f_level: must lie in (0, 1)");
        }
        if f.g_tolerances.iter().any(|&e| e.is_nan() || e <= 0.0) {
            bail!("fig3.g_tolerances: must be > 0");
        }
        if f.g_max_modules == 0 || f.g_periods == 0 || f.h_max_modules == 0 || f.h_periods == 0 {
            bail!("fig3: module and period limits must be >= 1");
        }
        if f.h_b_values.iter().any(|b| !(0.0..=1.0).contains(b)) {
            bail!("fig3.h_b_values: must lie in [0, 1]");
        }
        if f.h_targets
            .iter()
            .any(|t| t[0].is_nan() || t[0] <= 0.0 || !(0.0..1.0).contains(&t[1]) || t[1] == 0.0)
        {
            bail!("fig3.h_targets: tolerance must be > 0 and p0 in (0, 1)");
        }
        if self.model().nominal_step().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            bail!("profile: nominal thrust must be > 0");
        }
        Ok(())
    }

    pub fn model(&self) -> TransportModel {
        TransportModel::new(self.profile.clone(), self.gamma, self.noise)
    }

    /// Every `(N, T)` pair of the grid, N-major.
    pub fn cells(&self) -> Vec<RedundancyConfig> {
        self.grid
            .modules
            .iter()
            .flat_map(|&n| {
                self.grid
                    .periods
                    .iter()
                    .map(move |&t| RedundancyConfig::new(n, t).expect("validated grid"))
            })
            .collect()
    }
}
