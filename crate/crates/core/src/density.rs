//! Unnormalized density `σ(φ(x)·w)` and its normalized grid evaluation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rff::FeatureBasis;
use crate::serial;

/// Sampler diagnostics attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acceptance_rate: f64,
    pub n_iterations: usize,
    pub burn_in: usize,
    /// Log posterior of the chain state, recorded every `thin` iterations.
    #[serde(with = "serial::vec_f64_17")]
    pub objective_trace: Vec<f64>,
}

impl Diagnostics {
    /// Running maximum of the objective trace.
    pub fn map_trace(&self) -> Vec<f64> {
        self.objective_trace
            .iter()
            .scan(f64::NEG_INFINITY, |best, &v| {
                *best = best.max(v);
                Some(*best)
            })
            .collect()
    }
}

/// Fitted weights `w` and offset `c` for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFit {
    pub weights: Vec<f64>,
    /// Learned log-space constant absorbing `-log Z` and the noise density.
    pub offset: f64,
    pub basis_id: String,
    pub diagnostics: Diagnostics,
}

impl DensityFit {
    /// A fit with the given weights and no sampler history (fixtures, axis sweeps).
    pub fn from_weights(weights: Vec<f64>, basis: &FeatureBasis) -> Result<Self> {
        if weights.len() != basis.k() {
            return Err(Error::invalid(format!(
                "{} weights for a basis with k={}",
                weights.len(),
                basis.k()
            )));
        }
        Ok(DensityFit {
            weights,
            offset: 0.0,
            basis_id: basis.id(),
            diagnostics: Diagnostics {
                acceptance_rate: 0.0,
                n_iterations: 1,
                burn_in: 0,
                objective_trace: Vec::new(),
            },
        })
    }

    /// `f(x) = φ(x)·w`.
    pub fn latent(&self, basis: &FeatureBasis, x: &[f64]) -> Result<f64> {
        if self.weights.len() != basis.k() {
            return Err(Error::invalid(format!(
                "fit has {} weights, basis has k={}",
                self.weights.len(),
                basis.k()
            )));
        }
        let phi = basis.eval_features(x)?;
        Ok(phi.iter().zip(&self.weights).map(|(p, w)| p * w).sum())
    }

    /// `log σ(φ(x)·w)`.
    pub fn log_unnormalized_density(&self, basis: &FeatureBasis, x: &[f64]) -> Result<f64> {
        Ok(log_sigmoid(self.latent(basis, x)?))
    }
}

/// `log σ(f) = -log(1 + e^{-f})` without overflow for large `|f|`.
pub fn log_sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        -(-f).exp().ln_1p()
    } else {
        f - f.exp().ln_1p()
    }
}

/// Axis-aligned evaluation grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
}

pub const DEFAULT_RESOLUTION: usize = 100;
pub const DEFAULT_MARGIN: f64 = 0.25;

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 || bounds.len() != resolution.len() {
            return Err(Error::invalid("grid needs matching 1-D or 2-D bounds and resolution"));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("degenerate grid bounds on axis {axis}: [{lo}, {hi}]")));
            }
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::invalid("grid resolution must be at least 2 per axis"));
        }
        Ok(GridSpec { bounds, resolution })
    }

    /// Bounding box of `points` widened by 25% per side, 100 cells per axis.
    pub fn around(points: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let bounds = crate::series::bounding_box(points, DEFAULT_MARGIN)?;
        let res = vec![DEFAULT_RESOLUTION; bounds.len()];
        GridSpec::new(bounds, res)
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / self.resolution[axis] as f64
    }

    pub fn cell_area(&self) -> f64 {
        (0..self.bounds.len()).map(|a| self.cell_width(a)).product()
    }

    pub fn center(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis].0 + (i as f64 + 0.5) * self.cell_width(axis)
    }

    fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Cell-center coordinates for flat index `idx` (x fastest).
    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let nx = self.resolution[0];
        let mut c = vec![self.center(0, idx % nx)];
        if self.resolution.len() == 2 {
            c.push(self.center(1, idx / nx));
        }
        c
    }
}

/// Normalized density values on a grid. `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub cell_area: f64,
}

/// Evaluates `σ(f)` at every cell center and divides by its Riemann sum.
pub fn evaluate_grid(fit: &DensityFit, basis: &FeatureBasis, spec: &GridSpec) -> Result<GridDensity> {
    if spec.bounds.len() != basis.dim() {
        return Err(Error::invalid(format!(
            "{}-D grid for a {}-D basis",
            spec.bounds.len(),
            basis.dim()
        )));
    }
    let raw: Vec<f64> = (0..spec.n_cells())
        .into_par_iter()
        .map(|idx| Ok(fit.log_unnormalized_density(basis, &spec.cell_center(idx))?.exp()))
        .collect::<Result<_>>()?;
    GridDensity::normalize(spec.clone(), raw)
}

impl GridDensity {
    /// Builds a grid from non-negative unnormalized cell values.
    pub fn normalize(spec: GridSpec, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != spec.n_cells() {
            return Err(Error::invalid("grid value count does not match resolution"));
        }
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite("grid value is negative or non-finite".into()));
        }
        let cell_area = spec.cell_area();
        let total: f64 = raw.iter().sum::<f64>() * cell_area;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonFinite(format!("grid mass {total} cannot be normalized")));
        }
        let values = raw.into_iter().map(|v| v / total).collect();
        Ok(GridDensity {
            spec,
            values,
            cell_area,
        })
    }

    pub fn nx(&self) -> usize {
        self.spec.resolution[0]
    }

    pub fn ny(&self) -> usize {
        self.spec.resolution.get(1).copied().unwrap_or(1)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Center of the highest cell (first one on ties).
    pub fn argmax(&self) -> Vec<f64> {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.spec.cell_center(best)
    }

    /// `Σ |p - q| · cell_area` against another grid on the same spec.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::invalid("L1 distance needs grids on the same spec"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.cell_area)
    }

    /// Number of strict local maxima (8-neighborhood in 2-D, 2 in 1-D)
    /// whose value is at least `threshold_frac · max`.
    pub fn count_modes(&self, threshold_frac: f64) -> Result<usize> {
        if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
            return Err(Error::invalid(format!("threshold_frac must be in (0, 1), got {threshold_frac}")));
        }
        let (nx, ny) = (self.nx() as isize, self.ny() as isize);
        let cut = threshold_frac * self.max();
        let at = |ix: isize, iy: isize| self.values[(iy * nx + ix) as usize];
        let mut count = 0;
        for iy in 0..ny {
            for ix in 0..nx {
                let v = at(ix, iy);
                if v < cut {
                    continue;
                }
                let mut strict = true;
                'nb: for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (jx, jy) = (ix + dx, iy + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx || jy >= ny {
                            continue;
                        }
                        if at(jx, jy) >= v {
                            strict = false;
                            break 'nb;
                        }
                    }
                }
                if strict {
                    count += 1;
                }
            }
        }
        Ok(count)
    }

    fn require_2d(&self) -> Result<()> {
        if self.spec.resolution.len() != 2 {
            return Err(Error::invalid("grid export is only defined for 2-D grids"));
        }
        Ok(())
    }

    /// CSV with header `x,y,density`, y-major rows of x.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.require_2d()?;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "x,y,density").map_err(io)?;
        for iy in 0..self.ny() {
            let y = self.spec.center(1, iy);
            for ix in 0..self.nx() {
                let x = self.spec.center(0, ix);
                writeln!(out, "{x},{y},{}", self.values[iy * self.nx() + ix]).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    /// Binary 8-bit PGM, max density mapped to 255, top row = largest y.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        self.require_2d()?;
        let (nx, ny) = (self.nx(), self.ny());
        let max = self.max();
        let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        for iy in (0..ny).rev() {
            for ix in 0..nx {
                let v = self.values[iy * nx + ix] / max * 255.0;
                bytes.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        Ok(bytes)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()?).map_err(|e| Error::io(path, e))
    }
}

/// Reads back a `x,y,density` CSV as (x, y, density) triples.
pub fn read_grid_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    reader
        .deserialize::<(f64, f64, f64)>()
        .map(|r| {
            r.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}
