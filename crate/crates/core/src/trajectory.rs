//! Joint PCA over fitted weight vectors: projection, inverse mapping and
//! axis sweeps.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rff::{read_json, write_json};
use crate::serial;

/// Principal axes of a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProjection {
    pub mean: Vec<f64>,
    /// Unit principal axes, ordered by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Coordinates of each input vector on every component, in input order.
    pub coords: Vec<Vec<f64>>,
}

/// Eigenvalues below this fraction of the largest one are reported as zero.
const RELATIVE_EIGEN_FLOOR: f64 = 1e-12;

/// Mean-centered covariance (1/(n-1)) eigendecomposition. Each component is
/// signed so that its largest-magnitude entry is positive, the lowest index
/// winning ties.
pub fn fit_pca(vectors: &[Vec<f64>]) -> Result<TrajectoryProjection> {
    let mut proj = fit_pca_model(vectors)?;
    let all: Vec<usize> = (0..proj.k()).collect();
    proj.coords = vectors
        .iter()
        .map(|v| proj.project(v, &all))
        .collect::<Result<_>>()?;
    // Centering noise can leave ~1e-17 coordinates on degenerate input.
    if proj.eigenvalues.iter().all(|&l| l == 0.0) {
        proj.coords.iter_mut().flatten().for_each(|c| *c = 0.0);
    }
    Ok(proj)
}

/// Same as [`fit_pca`] without computing the input coordinates.
pub fn fit_pca_model(vectors: &[Vec<f64>]) -> Result<TrajectoryProjection> {
    if vectors.len() < 2 {
        return Err(Error::insufficient(format!("PCA needs at least 2 vectors, got {}", vectors.len())));
    }
    let k = vectors[0].len();
    if k == 0 {
        return Err(Error::invalid("PCA on zero-length vectors"));
    }
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != k) {
        return Err(Error::invalid(format!("vector {i} has length {}, expected {k}", v.len())));
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("PCA input contains non-finite values".into()));
    }
    let n = vectors.len();
    let mut mean = vec![0.0; k];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, k, |r, c| vectors[r][c] - mean[c]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = top * RELATIVE_EIGEN_FLOOR;
    let mut eigenvalues = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        eigenvalues.push(if lambda > floor { lambda } else { 0.0 });
        let mut u: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let mut pivot = 0;
        for (j, x) in u.iter().enumerate() {
            if x.abs() > u[pivot].abs() {
                pivot = j;
            }
        }
        if u[pivot] < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(u);
    }

    Ok(TrajectoryProjection {
        mean,
        components,
        eigenvalues,
        coords: Vec::new(),
    })
}

impl TrajectoryProjection {
    pub fn k(&self) -> usize {
        self.mean.len()
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        if let Some(a) = axes.iter().find(|&&a| a >= self.components.len()) {
            return Err(Error::invalid(format!(
                "component index {a} out of range (have {})",
                self.components.len()
            )));
        }
        Ok(())
    }

    /// `(w - mean)·components[a]` for each requested axis (0-based).
    pub fn project(&self, w: &[f64], axes: &[usize]) -> Result<Vec<f64>> {
        self.check_axes(axes)?;
        if w.len() != self.k() {
            return Err(Error::invalid(format!("vector has length {}, expected {}", w.len(), self.k())));
        }
        Ok(axes
            .iter()
            .map(|&a| {
                self.components[a]
                    .iter()
                    .zip(w.iter().zip(&self.mean))
                    .map(|(u, (x, m))| u * (x - m))
                    .sum()
            })
            .collect())
    }

    /// `mean + Σ coords[i] · components[axes[i]]`.
    pub fn inverse_map(&self, coords: &[f64], axes: &[usize]) -> Result<Vec<f64>> {
        self.check_axes(axes)?;
        if coords.len() != axes.len() {
            return Err(Error::invalid(format!(
                "{} coordinates for {} axes",
                coords.len(),
                axes.len()
            )));
        }
        let mut w = DVector::from_column_slice(&self.mean);
        for (&c, &a) in coords.iter().zip(axes) {
            w.axpy(c, &DVector::from_column_slice(&self.components[a]), 1.0);
        }
        Ok(w.iter().copied().collect())
    }

    /// Eigenvalue shares; empty when the total variance is zero.
    pub fn explained_variance(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return Vec::new();
        }
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// Number of non-zero eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }

    /// Sweep positions along one axis: multiples of `spacing` within the
    /// observed coordinate range, or the range endpoints when fewer than two
    /// multiples fit.
    pub fn sweep_positions(&self, axis: usize, spacing: f64) -> Result<Vec<f64>> {
        self.check_axes(&[axis])?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("sweep spacing must be positive, got {spacing}")));
        }
        let (lo, hi) = self
            .coords
            .iter()
            .map(|c| c[axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let first = (lo / spacing).ceil() as i64;
        let last = (hi / spacing).floor() as i64;
        let points: Vec<f64> = (first..=last).map(|i| i as f64 * spacing).collect();
        if points.len() >= 2 {
            Ok(points)
        } else if hi > lo {
            Ok(vec![lo, hi])
        } else {
            Ok(vec![lo])
        }
    }

    pub fn to_file(&self) -> ProjectionFile {
        ProjectionFile {
            mean: self.mean.clone(),
            components: self.components.clone(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }

    /// Loads a saved model. Stored coordinates are not part of the file.
    pub fn load(path: &Path) -> Result<Self> {
        let f: ProjectionFile = read_json(path)?;
        let k = f.mean.len();
        if f.components.iter().any(|c| c.len() != k) || f.components.len() != f.eigenvalues.len() {
            return Err(Error::format(path, "inconsistent projection dimensions"));
        }
        Ok(TrajectoryProjection {
            mean: f.mean,
            components: f.components,
            eigenvalues: f.eigenvalues,
            coords: Vec::new(),
        })
    }
}

/// On-disk PCA model, 17-significant-digit floats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionFile {
    #[serde(with = "serial::vec_f64_17")]
    pub mean: Vec<f64>,
    #[serde(with = "serial::vec_vec_f64_17")]
    pub components: Vec<Vec<f64>>,
    #[serde(with = "serial::vec_f64_17")]
    pub eigenvalues: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn random_vectors(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        (0..n)
            .map(|i| (0..k).map(|j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64) + i as f64 * 0.01).collect())
            .collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn orthonormal_and_sorted() {
        let p = fit_pca(&random_vectors(120, 30, 1)).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&p.components[i], &p.components[j]) - want).abs() < 1e-10);
            }
        }
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.rank() <= 120);
        let share: f64 = p.explained_variance().iter().sum();
        assert!((share - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sign_convention() {
        let p = fit_pca(&random_vectors(50, 8, 2)).unwrap();
        for u in &p.components {
            let max_abs = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = u.iter().find(|x| x.abs() == max_abs).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn identical_vectors() {
        let p = fit_pca(&vec![vec![1.5, -2.0, 3.0]; 5]).unwrap();
        assert!(p.eigenvalues.iter().all(|&l| l == 0.0));
        assert!(p.coords.iter().flatten().all(|&c| c == 0.0));
        assert!(p.explained_variance().is_empty());
    }

    #[test]
    fn collinear_points_rank_one() {
        let dir = [0.3, -1.0, 2.0, 0.5];
        let vs: Vec<Vec<f64>> = [-1.0, 0.5, 2.0]
            .iter()
            .map(|t| dir.iter().map(|d| 1.0 + t * d).collect())
            .collect();
        let p = fit_pca(&vs).unwrap();
        assert_eq!(p.rank(), 1);
        let ev = p.explained_variance();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!(ev[1..].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_pca(&[vec![1.0, 2.0]]).is_err());
        assert!(fit_pca(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        let p = fit_pca(&random_vectors(5, 3, 3)).unwrap();
        assert!(p.project(&[0.0; 3], &[3]).is_err());
        assert!(p.project(&[0.0; 2], &[0]).is_err());
        assert!(p.inverse_map(&[1.0], &[0, 1]).is_err());
    }

    #[test]
    fn projection_identities() {
        let vs = random_vectors(40, 6, 4);
        let p = fit_pca(&vs).unwrap();
        assert!(p.project(&p.mean, &[0, 1]).unwrap().iter().all(|c| c.abs() < 1e-15));
        assert_eq!(p.inverse_map(&[0.0, 0.0], &[2, 4]).unwrap(), p.mean);
        let all: Vec<usize> = (0..6).collect();
        for v in &vs {
            let c = p.project(v, &all).unwrap();
            let back = p.inverse_map(&c, &all).unwrap();
            assert!(back.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-8));
        }
        let c = [3.0, -7.5];
        let w = p.inverse_map(&c, &[2, 4]).unwrap();
        let again = p.project(&w, &[2, 4]).unwrap();
        assert!(again.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn translation_and_permutation() {
        let vs = random_vectors(20, 5, 5);
        let p = fit_pca(&vs).unwrap();
        let shifted: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|x| x + 10.0).collect()).collect();
        let q = fit_pca(&shifted).unwrap();
        for (a, b) in p.coords.iter().flatten().zip(q.coords.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        let mut rev = vs.clone();
        rev.reverse();
        let r = fit_pca(&rev).unwrap();
        for (i, c) in r.coords.iter().enumerate() {
            for (a, b) in c.iter().zip(&p.coords[19 - i]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mirror_through_mean_negates_exactly() {
        // Dyadic values keep the mean and the centering exact.
        let center = [0.5, -1.25, 2.0, 0.75];
        let offsets = [[1.0, 0.5, -0.25, 2.0], [-0.5, 1.5, 0.75, 0.25], [0.125, -1.0, 1.0, -0.5], [2.0, 0.25, 0.5, 1.0]];
        let mut vs = Vec::new();
        for d in &offsets {
            vs.push(center.iter().zip(d).map(|(c, x)| c + x).collect::<Vec<f64>>());
            vs.push(center.iter().zip(d).map(|(c, x)| c - x).collect::<Vec<f64>>());
        }
        let p = fit_pca(&vs).unwrap();
        assert_eq!(p.mean, center.to_vec());
        for pair in p.coords.chunks(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn sweep_positions_multiples() {
        let vs: Vec<Vec<f64>> = [-120.0, 0.0, 75.0].iter().map(|&x| vec![x, 0.0]).collect();
        let p = fit_pca(&vs).unwrap();
        let pos = p.sweep_positions(0, 50.0).unwrap();
        let lo = p.coords.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
        let hi = p.coords.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(pos.len() >= 2 && pos.windows(2).all(|w| (w[1] - w[0] - 50.0).abs() < 1e-9));
        assert!(pos.iter().all(|x| *x >= lo && *x <= hi));
        let tiny = p.sweep_positions(0, 1e6).unwrap();
        assert_eq!(tiny, vec![lo, hi]);
        assert!(p.sweep_positions(0, 0.0).is_err());
    }

    #[test]
    fn save_load() {
        let p = fit_pca(&random_vectors(10, 4, 6)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca.json");
        p.save(&path).unwrap();
        let q = TrajectoryProjection::load(&path).unwrap();
        assert_eq!(q.components, p.components);
        assert_eq!(q.mean, p.mean);
    }
}
