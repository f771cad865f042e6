//! Random Fourier feature map approximating the Gaussian kernel.
//!
//! `φ_k(x) = sqrt(2/K) · cos(ω_k·x + b_k)` with `ω_k ~ N(0, σ²I)`, so that
//! `E[φ(x)·φ(x')] = exp(-σ²‖x - x'‖²/2)` when the phases are uniform on
//! `[0, 2π)`.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seeds, serial};

/// Distribution of the phase offsets `b_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhaseRange {
    /// `b_k ~ Unif[0, 1)`, the literal published parameterization.
    PaperUnit,
    /// `b_k ~ Unif[0, 2π)`, the unbiased kernel estimator.
    #[default]
    TwoPi,
}

impl PhaseRange {
    pub fn upper(self) -> f64 {
        match self {
            PhaseRange::PaperUnit => 1.0,
            PhaseRange::TwoPi => TAU,
        }
    }
}

impl fmt::Display for PhaseRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseRange::PaperUnit => "unit",
            PhaseRange::TwoPi => "two-pi",
        })
    }
}

impl FromStr for PhaseRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" | "paperunit" | "paper-unit" => Ok(PhaseRange::PaperUnit),
            "two-pi" | "twopi" | "2pi" => Ok(PhaseRange::TwoPi),
            _ => Err(Error::invalid(format!("unknown phase range '{s}'"))),
        }
    }
}

/// The shared feature map: `k` frequency vectors of length `dim` plus phases.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    dim: usize,
    k: usize,
    sigma: f64,
    phase_range: PhaseRange,
    seed: u64,
    // Row-major k × dim; unit-variance draw and its σ-scaled copy.
    unit_frequencies: Vec<f64>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl FeatureBasis {
    /// Draws a basis. The draw is a pure function of the arguments; σ only
    /// rescales a unit-variance draw, so bases differing only in σ share
    /// their frequency directions.
    pub fn sample(
        dim: usize,
        k: usize,
        sigma: f64,
        phase_range: PhaseRange,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || k == 0 {
            return Err(Error::invalid(format!("dim and k must be positive (dim={dim}, k={k})")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        let mut rng = seeds::rng(seed);
        let unit_frequencies: Vec<f64> = (0..k * dim).map(|_| rng.sample(StandardNormal)).collect();
        let upper = phase_range.upper();
        let phases = (0..k).map(|_| rng.gen::<f64>() * upper).collect();
        let frequencies = unit_frequencies.iter().map(|w| w * sigma).collect();
        Ok(FeatureBasis {
            dim,
            k,
            sigma,
            phase_range,
            seed,
            unit_frequencies,
            frequencies,
            phases,
        })
    }

    /// Same frequency directions and phases, different σ.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        Ok(FeatureBasis {
            sigma,
            frequencies: self.unit_frequencies.iter().map(|w| w * sigma).collect(),
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn phase_range(&self) -> PhaseRange {
        self.phase_range
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.frequencies[i * self.dim..(i + 1) * self.dim]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Short identifier tying fits to the basis they were computed with.
    pub fn id(&self) -> String {
        let h = self
            .frequencies
            .iter()
            .chain(&self.phases)
            .chain(std::iter::once(&self.sigma))
            .fold(seeds::hash_tag("basis"), |h, x| seeds::mix64(h ^ x.to_bits()));
        format!("rff-{}x{}-{:016x}", self.k, self.dim, h)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {len}, basis expects {}",
                self.dim
            )));
        }
        Ok(())
    }

    fn features_into(&self, x: &[f64], out: &mut [f64]) {
        let scale = (2.0 / self.k as f64).sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            let proj: f64 = self.frequency(i).iter().zip(x).map(|(w, xi)| w * xi).sum();
            *o = scale * (proj + self.phases[i]).cos();
        }
    }

    /// `φ(x)`.
    pub fn eval_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.k];
        self.features_into(x, &mut out);
        Ok(out)
    }

    /// Design matrix Φ: row `i` is `φ(points[i])`. `points` is N × dim.
    pub fn design_matrix(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.nrows() > 0 {
            self.check_dim(points.ncols())?;
        }
        let n = points.nrows();
        let mut phi = DMatrix::zeros(n, self.k);
        let mut x = vec![0.0; self.dim];
        let mut row = vec![0.0; self.k];
        for r in 0..n {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = points[(r, j)];
            }
            self.features_into(&x, &mut row);
            for (c, v) in row.iter().enumerate() {
                phi[(r, c)] = *v;
            }
        }
        Ok(phi)
    }

    pub fn to_file(&self) -> BasisFile {
        BasisFile {
            dim: self.dim,
            k: self.k,
            sigma: self.sigma,
            phase_range: self.phase_range,
            seed: self.seed,
            frequencies: (0..self.k).map(|i| self.frequency(i).to_vec()).collect(),
            phases: self.phases.clone(),
        }
    }

    pub fn from_file(file: BasisFile) -> Result<Self> {
        let BasisFile {
            dim,
            k,
            sigma,
            phase_range,
            seed,
            frequencies,
            phases,
        } = file;
        if dim == 0 || k == 0 || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("basis file has non-positive dim, k or sigma"));
        }
        if frequencies.len() != k || frequencies.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid(format!("basis file frequencies are not {k}×{dim}")));
        }
        let upper = phase_range.upper();
        if phases.len() != k || phases.iter().any(|b| !(0.0..upper).contains(b)) {
            return Err(Error::invalid(format!(
                "basis file needs {k} phases in [0, {upper})"
            )));
        }
        let frequencies: Vec<f64> = frequencies.into_iter().flatten().collect();
        Ok(FeatureBasis {
            dim,
            k,
            sigma,
            phase_range,
            seed,
            unit_frequencies: frequencies.iter().map(|w| w / sigma).collect(),
            frequencies,
            phases,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(read_json(path)?)
    }
}

/// On-disk form of a [`FeatureBasis`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub dim: usize,
    pub k: usize,
    #[serde(with = "serial::f64_17")]
    pub sigma: f64,
    pub phase_range: PhaseRange,
    pub seed: u64,
    #[serde(with = "serial::vec_vec_f64_17")]
    pub frequencies: Vec<Vec<f64>>,
    #[serde(with = "serial::vec_f64_17")]
    pub phases: Vec<f64>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Median heuristic: `σ = 1 / median pairwise distance`. Uses at most
/// `max_points` rows, taken at an even stride so the result is deterministic.
pub fn median_heuristic_sigma(points: &DMatrix<f64>, max_points: usize) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::insufficient("median heuristic needs at least 2 points"));
    }
    let stride = n.div_ceil(max_points.max(2));
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            let d2: f64 = (0..points.ncols())
                .map(|c| (points[(i, c)] - points[(j, c)]).powi(2))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return Err(Error::insufficient("median heuristic needs at least 2 points"));
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if !(median > 0.0) {
        return Err(Error::insufficient("median pairwise distance is zero"));
    }
    Ok(1.0 / median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sample_shapes() {
        let b = FeatureBasis::sample(2, 30, 1.0, PhaseRange::TwoPi, 7).unwrap();
        assert_eq!(b.k(), 30);
        assert_eq!(b.dim(), 2);
        for i in 0..30 {
            assert_eq!(b.frequency(i).len(), 2);
        }
        assert!(b.phases().iter().all(|p| (0.0..TAU).contains(p)));
    }

    #[test]
    fn unit_phases_in_unit_interval() {
        let b = FeatureBasis::sample(3, 500, 1.0, PhaseRange::PaperUnit, 1).unwrap();
        assert!(b.phases().iter().all(|p| (0.0..1.0).contains(p)));
    }

    #[test]
    fn tiny_sigma_gives_near_zero_frequency() {
        let b = FeatureBasis::sample(2, 1, 1e-12, PhaseRange::PaperUnit, 3).unwrap();
        assert!(b.frequency(0).iter().all(|w| w.abs() < 1e-10));
    }

    #[test]
    fn deterministic() {
        let a = FeatureBasis::sample(2, 30, 0.7, PhaseRange::TwoPi, 99).unwrap();
        let b = FeatureBasis::sample(2, 30, 0.7, PhaseRange::TwoPi, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, FeatureBasis::sample(2, 30, 0.7, PhaseRange::TwoPi, 100).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(FeatureBasis::sample(0, 3, 1.0, PhaseRange::TwoPi, 0).is_err());
        assert!(FeatureBasis::sample(2, 0, 1.0, PhaseRange::TwoPi, 0).is_err());
        assert!(FeatureBasis::sample(2, 3, 0.0, PhaseRange::TwoPi, 0).is_err());
        assert!(FeatureBasis::sample(2, 3, -1.0, PhaseRange::TwoPi, 0).is_err());
        let b = FeatureBasis::sample(2, 3, 1.0, PhaseRange::TwoPi, 0).unwrap();
        assert!(b.eval_features(&[1.0]).is_err());
        assert!(b.design_matrix(&DMatrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn sigma_scales_unit_draw() {
        let unit = FeatureBasis::sample(2, 40, 1.0, PhaseRange::TwoPi, 5).unwrap();
        let wide = FeatureBasis::sample(2, 40, 2.5, PhaseRange::TwoPi, 5).unwrap();
        for i in 0..40 {
            for (a, b) in unit.frequency(i).iter().zip(wide.frequency(i)) {
                assert_eq!(a * 2.5, *b);
            }
        }
        assert_eq!(unit.phases(), wide.phases());
        assert_eq!(unit.with_sigma(2.5).unwrap(), wide);
    }

    #[test]
    fn zero_frequency_features_are_one() {
        let file = BasisFile {
            dim: 2,
            k: 2,
            sigma: 1.0,
            phase_range: PhaseRange::TwoPi,
            seed: 0,
            frequencies: vec![vec![0.0, 0.0]; 2],
            phases: vec![0.0, 0.0],
        };
        let b = FeatureBasis::from_file(file).unwrap();
        assert_eq!(b.eval_features(&[3.0, -8.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn features_bounded() {
        let b = FeatureBasis::sample(2, 30, 1.0, PhaseRange::TwoPi, 11).unwrap();
        let bound = (2.0f64 / 30.0).sqrt();
        let mut rng = seeds::rng(1);
        for _ in 0..200 {
            let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let phi = b.eval_features(&x).unwrap();
            assert_eq!(phi.len(), 30);
            assert!(phi.iter().all(|v| v.abs() <= bound + 1e-15));
            assert!(phi.iter().map(|v| v * v).sum::<f64>() <= 2.0 + 1e-12);
        }
        assert!((bound - 0.2582).abs() < 1e-4);
    }

    #[test]
    fn design_matrix_rows() {
        let b = FeatureBasis::sample(2, 30, 1.0, PhaseRange::TwoPi, 2).unwrap();
        assert_eq!(b.design_matrix(&DMatrix::zeros(0, 2)).unwrap().shape(), (0, 30));
        let p = DMatrix::from_row_slice(1, 2, &[0.3, -1.2]);
        let phi = b.design_matrix(&p).unwrap();
        assert_eq!(phi.shape(), (1, 30));
        let direct = b.eval_features(&[0.3, -1.2]).unwrap();
        for c in 0..30 {
            assert_eq!(phi[(0, c)], direct[c]);
        }
        let many = DMatrix::from_fn(200, 2, |r, c| (r as f64 * 0.01) - c as f64);
        assert_eq!(b.design_matrix(&many).unwrap().shape(), (200, 30));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.json");
        let b = FeatureBasis::sample(2, 30, 0.613, PhaseRange::TwoPi, 42).unwrap();
        b.save(&path).unwrap();
        let back = FeatureBasis::load(&path).unwrap();
        assert_eq!(back.to_file().frequencies, b.to_file().frequencies);
        assert_eq!(back.phases(), b.phases());
        assert_eq!(back.sigma(), b.sigma());
        assert_eq!(back.id(), b.id());
        let x = [0.25, -1.75];
        assert_eq!(back.eval_features(&x).unwrap(), b.eval_features(&x).unwrap());
    }

    #[test]
    fn median_heuristic_two_points() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        assert_eq!(median_heuristic_sigma(&p, 100).unwrap(), 0.2);
        let same = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(median_heuristic_sigma(&same, 100).is_err());
    }
}
