//! Synthetic movement regimes: a shifting cluster, two merging clusters,
//! and two splitting clusters.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::series::{Step, VectorSetSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Movement {
    Shift,
    Converge,
    Diverge,
}

impl Movement {
    pub fn name(self) -> &'static str {
        match self {
            Movement::Shift => "Shift",
            Movement::Converge => "Converge",
            Movement::Diverge => "Diverge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub label: String,
    pub movement: Movement,
    pub n_steps: usize,
    pub n_points: usize,
    pub cluster_std: f64,
    /// Shift: direction of travel. Converge/Diverge: axis joining the two groups.
    pub direction_angle: f64,
    /// Total center displacement over the series.
    pub travel: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(movement: Movement, direction_angle: f64, seed: u64) -> Self {
        SyntheticSpec {
            label: movement.name().to_string(),
            movement,
            n_steps: 10,
            n_points: 200,
            cluster_std: 0.5,
            direction_angle,
            travel: 4.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 || self.n_points < 2 {
            return Err(Error::invalid(format!(
                "synthetic series needs n_steps ≥ 2 and n_points ≥ 2 (got {} and {})",
                self.n_steps, self.n_points
            )));
        }
        if !(self.cluster_std > 0.0 && self.travel > 0.0 && self.direction_angle.is_finite()) {
            return Err(Error::invalid("cluster_std and travel must be positive"));
        }
        Ok(())
    }

    /// Cluster centers and their point counts at step `t` (0-based).
    pub fn centers(&self, t: usize) -> Vec<([f64; 2], usize)> {
        let u = [self.direction_angle.cos(), self.direction_angle.sin()];
        let at = |a: f64| [a * u[0], a * u[1]];
        let s = t as f64 / (self.n_steps - 1) as f64;
        let half = self.travel / 2.0;
        let (big, small) = (self.n_points.div_ceil(2), self.n_points / 2);
        match self.movement {
            Movement::Shift => vec![(at(-half + self.travel * s), self.n_points)],
            Movement::Converge => {
                let a = half * (1.0 - s);
                vec![(at(a), big), (at(-a), small)]
            }
            Movement::Diverge => {
                let a = half * s;
                vec![(at(a), big), (at(-a), small)]
            }
        }
    }
}

/// Draws the series: isotropic Gaussian clusters around the scheduled centers.
pub fn generate(spec: &SyntheticSpec) -> Result<VectorSetSeries> {
    spec.validate()?;
    let steps = (0..spec.n_steps)
        .map(|t| {
            let label = (t + 1).to_string();
            let mut rng = seeds::rng(seeds::derive(spec.seed, &label));
            let mut points = DMatrix::zeros(spec.n_points, 2);
            let mut r = 0;
            for (center, count) in spec.centers(t) {
                for _ in 0..count {
                    for (c, mu) in center.iter().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        points[(r, c)] = mu + spec.cluster_std * z;
                    }
                    r += 1;
                }
            }
            Step {
                time_label: label,
                points,
            }
        })
        .collect();
    VectorSetSeries::new(spec.label.clone(), steps)
}

/// The twelve-instance suite specs: four angles per movement type. Shift_1
/// and Shift_2 travel in opposite directions.
pub fn suite_specs(seed: u64) -> Vec<SyntheticSpec> {
    let shift_angles = [0.0, PI, FRAC_PI_2, 3.0 * FRAC_PI_2];
    let axis_angles = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
    let mut specs = Vec::with_capacity(12);
    for (movement, angles) in [
        (Movement::Shift, shift_angles),
        (Movement::Converge, axis_angles),
        (Movement::Diverge, axis_angles),
    ] {
        for (i, angle) in angles.into_iter().enumerate() {
            let label = format!("{}_{}", movement.name(), i + 1);
            let mut spec = SyntheticSpec::new(movement, angle, seeds::derive_path(seed, &["synthetic", &label]));
            spec.label = label;
            specs.push(spec);
        }
    }
    specs
}

pub fn generate_suite(seed: u64) -> Result<Vec<VectorSetSeries>> {
    suite_specs(seed).iter().map(generate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_mean(m: &DMatrix<f64>, rows: std::ops::Range<usize>, c: usize) -> f64 {
        let n = rows.len() as f64;
        rows.map(|r| m[(r, c)]).sum::<f64>() / n
    }

    #[test]
    fn shift_defaults() {
        let s = generate(&SyntheticSpec::new(Movement::Shift, 0.3, 1)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.steps().iter().all(|st| st.points.shape() == (200, 2)));
    }

    #[test]
    fn means_track_schedule() {
        for movement in [Movement::Shift, Movement::Converge, Movement::Diverge] {
            let spec = SyntheticSpec::new(movement, 1.0, 77);
            let s = generate(&spec).unwrap();
            for (t, step) in s.steps().iter().enumerate() {
                let mut start = 0;
                for (center, count) in spec.centers(t) {
                    let bound = 4.0 * spec.cluster_std / (count as f64).sqrt();
                    for c in 0..2 {
                        let m = column_mean(&step.points, start..start + count, c);
                        assert!((m - center[c]).abs() < bound, "{movement:?} t={t}");
                    }
                    start += count;
                }
            }
        }
    }

    #[test]
    fn converge_ends_coincident() {
        let spec = SyntheticSpec::new(Movement::Converge, 0.0, 5);
        let s = generate(&spec).unwrap();
        let last = &s.steps()[9].points;
        let bound = 3.0 * spec.cluster_std / 10.0;
        for c in 0..2 {
            let a = column_mean(last, 0..100, c);
            let b = column_mean(last, 100..200, c);
            assert!((a - b).abs() < bound);
        }
    }

    #[test]
    fn diverge_reverses_converge() {
        let conv = SyntheticSpec::new(Movement::Converge, 0.4, 1);
        let div = SyntheticSpec::new(Movement::Diverge, 0.4, 1);
        for t in 0..10 {
            let a = conv.centers(t);
            let b = div.centers(9 - t);
            for (x, y) in a.iter().zip(&b) {
                assert!((x.0[0] - y.0[0]).abs() < 1e-12 && (x.0[1] - y.0[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_split() {
        let mut spec = SyntheticSpec::new(Movement::Converge, 0.0, 1);
        spec.n_points = 7;
        let counts: Vec<usize> = spec.centers(0).iter().map(|c| c.1).collect();
        assert_eq!(counts, vec![4, 3]);
    }

    #[test]
    fn suite_layout() {
        let suite = generate_suite(2024).unwrap();
        let labels: Vec<&str> = suite.iter().map(|s| s.instance_label()).collect();
        assert_eq!(
            labels,
            [
                "Shift_1", "Shift_2", "Shift_3", "Shift_4", "Converge_1", "Converge_2", "Converge_3",
                "Converge_4", "Diverge_1", "Diverge_2", "Diverge_3", "Diverge_4"
            ]
        );
        assert!(suite.iter().all(|s| s.len() == 10 && s.total_points() == 2000));
        let specs = suite_specs(2024);
        for t in 0..10 {
            let a = specs[0].centers(t)[0].0;
            let b = specs[1].centers(t)[0].0;
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
        assert_eq!(generate_suite(2024).unwrap(), suite);
        assert_ne!(generate_suite(2025).unwrap(), suite);
    }

    #[test]
    fn rejects_invalid() {
        let mut spec = SyntheticSpec::new(Movement::Shift, 0.0, 1);
        spec.n_steps = 1;
        assert!(generate(&spec).is_err());
        spec.n_steps = 10;
        spec.cluster_std = 0.0;
        assert!(generate(&spec).is_err());
    }
}
