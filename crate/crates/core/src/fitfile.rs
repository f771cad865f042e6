//! Per-series fit file: the hand-off between fitting and projection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrastive::{step_seeds, MhConfig, NoiseConfig};
use crate::density::{DensityFit, Diagnostics};
use crate::error::{Error, Result};
use crate::rff::{read_json, write_json, FeatureBasis};
use crate::serial;
use crate::series::{bounding_box, VectorSetSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub time: String,
    #[serde(with = "serial::vec_f64_17")]
    pub weights: Vec<f64>,
    #[serde(with = "serial::f64_17")]
    pub offset: f64,
    pub acceptance_rate: f64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub noise_seed: u64,
    pub mh_seed: u64,
    /// Bounding box of the step's points, `[lo, hi]` per axis.
    #[serde(with = "serial::vec_vec_f64_17")]
    pub data_bounds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub instance: String,
    pub basis_id: String,
    /// Shared noise box, `[lo, hi]` per axis.
    #[serde(with = "serial::vec_vec_f64_17")]
    pub noise_box: Vec<Vec<f64>>,
    pub steps: Vec<FitRecord>,
}

impl FitFile {
    pub fn from_fits(
        series: &VectorSetSeries,
        fits: &[DensityFit],
        noise: &NoiseConfig,
        mh: &MhConfig,
    ) -> Result<Self> {
        if fits.len() != series.len() {
            return Err(Error::invalid("one fit per series step is required"));
        }
        let basis_id = fits
            .first()
            .map(|f| f.basis_id.clone())
            .ok_or_else(|| Error::invalid("no fits"))?;
        let steps = series
            .steps()
            .iter()
            .zip(fits)
            .map(|(step, fit)| {
                let (noise_seed, mh_seed) = step_seeds(noise, mh, &step.time_label);
                Ok(FitRecord {
                    time: step.time_label.clone(),
                    weights: fit.weights.clone(),
                    offset: fit.offset,
                    acceptance_rate: fit.diagnostics.acceptance_rate,
                    n_iterations: fit.diagnostics.n_iterations,
                    burn_in: fit.diagnostics.burn_in,
                    noise_seed,
                    mh_seed,
                    data_bounds: bounding_box(&step.points, 0.0)?
                        .into_iter()
                        .map(|(lo, hi)| vec![lo, hi])
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(FitFile {
            instance: series.instance_label().to_string(),
            basis_id,
            noise_box: noise.bounds.iter().map(|&(lo, hi)| vec![lo, hi]).collect(),
            steps,
        })
    }

    pub fn step(&self, time: &str) -> Result<&FitRecord> {
        self.steps.iter().find(|s| s.time == time).ok_or_else(|| {
            Error::invalid(format!(
                "no step '{time}' in fit for '{}' (have: {})",
                self.instance,
                self.steps.iter().map(|s| s.time.as_str()).collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// Rebuilds the step's fit, checking it belongs to `basis`.
    pub fn density_fit(&self, time: &str, basis: &FeatureBasis) -> Result<DensityFit> {
        if self.basis_id != basis.id() {
            return Err(Error::invalid(format!(
                "fit for '{}' was made with basis {}, not {}",
                self.instance,
                self.basis_id,
                basis.id()
            )));
        }
        let r = self.step(time)?;
        if r.weights.len() != basis.k() {
            return Err(Error::invalid("fit weight count does not match the basis"));
        }
        Ok(DensityFit {
            weights: r.weights.clone(),
            offset: r.offset,
            basis_id: self.basis_id.clone(),
            diagnostics: Diagnostics {
                acceptance_rate: r.acceptance_rate,
                n_iterations: r.n_iterations,
                burn_in: r.burn_in,
                objective_trace: Vec::new(),
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: FitFile = read_json(path)?;
        if f.steps.is_empty() {
            return Err(Error::format(path, "fit file has no steps"));
        }
        let k = f.steps[0].weights.len();
        if f.steps.iter().any(|s| s.weights.len() != k) {
            return Err(Error::format(path, "fit steps have differing weight lengths"));
        }
        Ok(f)
    }
}

pub fn bounds_pairs(rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    rows.iter()
        .map(|r| match r.as_slice() {
            [lo, hi] => Ok((*lo, *hi)),
            _ => Err(Error::invalid("bounds rows must be [lo, hi]")),
        })
        .collect()
}
