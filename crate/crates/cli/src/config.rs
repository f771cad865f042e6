use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vecset_core::ingest::{CrimeColumns, NormalizeMode};
use vecset_core::{Estimator, MhConfig, PhaseRange};

/// Error in the configuration itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Fixed(f64),
    Named(String),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Named("median".into())
    }
}

impl Sigma {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(Sigma::Named("median".into()));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(Sigma::Fixed)
            .ok_or_else(|| ConfigError(format!("sigma must be 'median' or a positive number, got '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub k: usize,
    pub sigma: Sigma,
    pub phase_range: PhaseRange,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            k: 30,
            sigma: Sigma::default(),
            phase_range: PhaseRange::TwoPi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub ratio: f64,
    /// Per-side widening of the pooled bounding box.
    pub margin: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { ratio: 1.0, margin: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhParams {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_size: f64,
    pub prior_w_std: f64,
    pub prior_c_std: f64,
    pub estimator: Estimator,
}

impl Default for MhParams {
    fn default() -> Self {
        let d = MhConfig::default();
        MhParams {
            n_iterations: d.n_iterations,
            burn_in: d.burn_in,
            thin: d.thin,
            step_size: d.step_size,
            prior_w_std: d.prior_w_std,
            prior_c_std: d.prior_c_std,
            estimator: d.estimator,
        }
    }
}

impl MhParams {
    pub fn with_seed(&self, seed: u64) -> MhConfig {
        MhConfig {
            n_iterations: self.n_iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            step_size: self.step_size,
            prior_w_std: self.prior_w_std,
            prior_c_std: self.prior_c_std,
            seed,
            estimator: self.estimator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    pub margin: f64,
    pub mode_threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: 100,
            margin: 0.25,
            mode_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// 1-based principal component numbers.
    pub axes: Vec<usize>,
    pub axis_sweep: bool,
    pub sweep_spacing: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            axes: vec![1, 2],
            axis_sweep: false,
            sweep_spacing: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
    pub step: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    Synthetic,
    Crime {
        path: PathBuf,
        types: Vec<String>,
        years: YearRange,
        #[serde(default = "default_per_year")]
        per_year: usize,
        #[serde(default)]
        columns: CrimeColumns,
        #[serde(default)]
        normalize: NormalizeMode,
    },
    Embeddings {
        /// Word → one embedding matrix per period, in period order.
        words: BTreeMap<String, Vec<PathBuf>>,
        #[serde(default = "default_target_dim")]
        target_dim: usize,
    },
    /// Pre-built series CSV files.
    Series { paths: Vec<PathBuf> },
}

fn default_per_year() -> usize {
    200
}

fn default_target_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub basis: BasisConfig,
    pub noise: NoiseParams,
    pub mh: MhParams,
    pub grid: GridConfig,
    pub projection: ProjectionConfig,
    pub source: Source,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 2024,
            basis: BasisConfig::default(),
            noise: NoiseParams::default(),
            mh: MhParams::default(),
            grid: GridConfig::default(),
            projection: ProjectionConfig::default(),
            source: Source::Synthetic,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        // Relative input paths are resolved against the config file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.source {
            Source::Synthetic => {}
            Source::Crime { path, .. } => fix(path),
            Source::Embeddings { words, .. } => words.values_mut().flatten().for_each(fix),
            Source::Series { paths } => paths.iter_mut().for_each(fix),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.basis.k == 0 {
            return Err(ConfigError("basis.k must be positive".into()));
        }
        if let Sigma::Named(n) = &self.basis.sigma {
            if n != "median" {
                return Err(ConfigError(format!("unknown sigma rule '{n}'")));
            }
        }
        self.mh
            .with_seed(0)
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        if !(self.noise.ratio > 0.0) || !(self.noise.margin >= 0.0) {
            return Err(ConfigError("noise.ratio must be positive and noise.margin non-negative".into()));
        }
        if self.grid.resolution < 2 || !(self.grid.margin >= 0.0) {
            return Err(ConfigError("grid.resolution must be ≥ 2 and grid.margin non-negative".into()));
        }
        if !(self.grid.mode_threshold > 0.0 && self.grid.mode_threshold < 1.0) {
            return Err(ConfigError("grid.mode_threshold must be in (0, 1)".into()));
        }
        if self.projection.axes.is_empty() || self.projection.axes.contains(&0) {
            return Err(ConfigError("projection.axes are 1-based and must be non-empty".into()));
        }
        if !(self.projection.sweep_spacing > 0.0) {
            return Err(ConfigError("projection.sweep_spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `"1,2"` / `"3,5"` into 1-based axis numbers.
pub fn parse_axes(s: &str) -> Result<Vec<usize>, ConfigError> {
    let axes = s
        .split(',')
        .map(|a| a.trim().parse::<usize>().ok().filter(|&v| v >= 1))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| ConfigError(format!("axes must be 1-based integers like '1,2', got '{s}'")))?;
    if axes.is_empty() {
        return Err(ConfigError("no axes given".into()));
    }
    Ok(axes)
}
