//! Contrastive (noise-contrastive) estimation of the weights `w` and the
//! offset `c` with a random-walk Metropolis-Hastings sampler.
//!
//! The data-vs-noise classifier is `p(z=1|x) = s(log σ(φ(x)·w) + c)` where
//! `s` is the logistic function and `c` absorbs both `-log Z` and the log
//! density of the uniform noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{log_sigmoid, DensityFit, Diagnostics};
use crate::error::{Error, Result};
use crate::rff::FeatureBasis;
use crate::seeds;
use crate::series::{bounding_box, VectorSetSeries};

/// Negative-sample settings: `round(ratio · N)` uniform draws over `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub ratio: f64,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl NoiseConfig {
    /// Uniform noise over the pooled bounding box of `series`, widened by
    /// `margin` per side.
    pub fn pooled(series: &[VectorSetSeries], margin: f64, ratio: f64, seed: u64) -> Result<Self> {
        let bounds = bounding_box(&crate::series::pool(series), margin)?;
        let cfg = NoiseConfig {
            ratio,
            bounds,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::invalid(format!("noise ratio must be positive, got {}", self.ratio)));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("noise box has no axes"));
        }
        for (axis, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("degenerate noise box on axis {axis}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn count_for(&self, n: usize) -> usize {
        (self.ratio * n as f64).round() as usize
    }
}

/// Point estimate reported from the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Estimator {
    #[default]
    PosteriorMean,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MhConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Standard deviation of the isotropic Gaussian proposal on `(w, c)`.
    pub step_size: f64,
    pub prior_w_std: f64,
    pub prior_c_std: f64,
    pub seed: u64,
    pub estimator: Estimator,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            n_iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            step_size: 0.15,
            prior_w_std: 6.0,
            prior_c_std: 10.0,
            seed: 0,
            estimator: Estimator::PosteriorMean,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be below n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        // A zero step is accepted: the chain then stays at its initial point.
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!("step_size must be non-negative, got {}", self.step_size)));
        }
        for (name, v) in [("prior_w_std", self.prior_w_std), ("prior_c_std", self.prior_c_std)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Uniform negatives over the noise box. Requires at least two positives.
pub fn sample_negatives(points: &DMatrix<f64>, cfg: &NoiseConfig) -> Result<DMatrix<f64>> {
    if points.nrows() < 2 {
        return Err(Error::insufficient(format!("need at least 2 points, got {}", points.nrows())));
    }
    cfg.validate()?;
    if points.ncols() != cfg.bounds.len() {
        return Err(Error::invalid(format!(
            "points are {}-D but the noise box is {}-D",
            points.ncols(),
            cfg.bounds.len()
        )));
    }
    let m = cfg.count_for(points.nrows());
    let mut rng = seeds::rng(cfg.seed);
    let mut out = DMatrix::zeros(m, cfg.bounds.len());
    for r in 0..m {
        for (c, &(lo, hi)) in cfg.bounds.iter().enumerate() {
            out[(r, c)] = lo + (hi - lo) * rng.gen::<f64>();
        }
    }
    Ok(out)
}

fn check_shapes(k: usize, pos: &DMatrix<f64>, neg: &DMatrix<f64>) -> Result<()> {
    if pos.ncols() != k || neg.ncols() != k {
        return Err(Error::invalid(format!(
            "feature matrices have {} and {} columns, weights have {k}",
            pos.ncols(),
            neg.ncols()
        )));
    }
    Ok(())
}

fn objective_unchecked(w: &[f64], c: f64, pos: &DMatrix<f64>, neg: &DMatrix<f64>) -> f64 {
    let latent = |feats: &DMatrix<f64>, r: usize| -> f64 {
        w.iter().enumerate().map(|(j, wj)| feats[(r, j)] * wj).sum()
    };
    let pos_term: f64 = (0..pos.nrows())
        .map(|r| log_sigmoid(log_sigmoid(latent(pos, r)) + c))
        .sum();
    let neg_term: f64 = (0..neg.nrows())
        .map(|r| log_sigmoid(-(log_sigmoid(latent(neg, r)) + c)))
        .sum();
    pos_term + neg_term
}

/// `Σ_pos log s(g) + Σ_neg log(1 - s(g))` with `g = log σ(φ·w) + c`.
pub fn contrastive_log_objective(
    w: &[f64],
    c: f64,
    pos_feats: &DMatrix<f64>,
    neg_feats: &DMatrix<f64>,
) -> Result<f64> {
    check_shapes(w.len(), pos_feats, neg_feats)?;
    Ok(objective_unchecked(w, c, pos_feats, neg_feats))
}

fn log_prior(w: &[f64], c: f64, mh: &MhConfig) -> f64 {
    let w2: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * w2 / (mh.prior_w_std * mh.prior_w_std) - 0.5 * c * c / (mh.prior_c_std * mh.prior_c_std)
}

/// Contrastive objective plus Gaussian priors on `w` and `c`, dropping
/// normalizing constants.
pub fn log_posterior(
    w: &[f64],
    c: f64,
    pos_feats: &DMatrix<f64>,
    neg_feats: &DMatrix<f64>,
    mh: &MhConfig,
) -> Result<f64> {
    Ok(contrastive_log_objective(w, c, pos_feats, neg_feats)? + log_prior(w, c, mh))
}

/// Cached feature matrices for the positive and negative samples of one step.
struct Problem {
    pos: DMatrix<f64>,
    neg: DMatrix<f64>,
}

impl Problem {
    fn new(pos: DMatrix<f64>, neg: DMatrix<f64>) -> Self {
        Problem { pos, neg }
    }

    fn log_posterior(&self, state: &DVector<f64>, mh: &MhConfig) -> f64 {
        let k = state.len() - 1;
        let w = state.rows(0, k);
        let c = state[k];
        let pos: f64 = (&self.pos * &w)
            .iter()
            .map(|&f| log_sigmoid(log_sigmoid(f) + c))
            .sum();
        let neg: f64 = (&self.neg * &w)
            .iter()
            .map(|&f| log_sigmoid(-(log_sigmoid(f) + c)))
            .sum();
        pos + neg + log_prior(w.as_slice(), c, mh)
    }
}

/// Fits `(w, c)` for one point set by random-walk Metropolis-Hastings,
/// starting from zero.
pub fn fit_weights(
    points: &DMatrix<f64>,
    basis: &FeatureBasis,
    noise: &NoiseConfig,
    mh: &MhConfig,
) -> Result<DensityFit> {
    mh.validate()?;
    let negatives = sample_negatives(points, noise)?;
    let problem = Problem::new(basis.design_matrix(points)?, basis.design_matrix(&negatives)?);
    run_chain(&problem, basis, mh)
}

fn run_chain(problem: &Problem, basis: &FeatureBasis, mh: &MhConfig) -> Result<DensityFit> {
    let k = basis.k();
    let mut rng = seeds::rng(mh.seed);
    let mut state = DVector::<f64>::zeros(k + 1);
    let mut current = problem.log_posterior(&state, mh);
    if !current.is_finite() {
        return Err(Error::NonFinite(format!("log posterior at the initial point is {current}")));
    }
    let mut best = (current, state.clone());
    let mut sum = DVector::<f64>::zeros(k + 1);
    let mut n_kept = 0usize;
    let mut accepted = 0usize;
    let mut trace = Vec::with_capacity(mh.n_iterations / mh.thin + 1);
    let mut proposal = DVector::<f64>::zeros(k + 1);

    for it in 0..mh.n_iterations {
        for (p, s) in proposal.iter_mut().zip(state.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *p = s + mh.step_size * z;
        }
        let candidate = problem.log_posterior(&proposal, mh);
        if candidate.is_nan() {
            return Err(Error::NonFinite(format!("log posterior is NaN at iteration {it}")));
        }
        let u: f64 = rng.gen();
        if u.ln() < candidate - current {
            std::mem::swap(&mut state, &mut proposal);
            current = candidate;
            accepted += 1;
            if current > best.0 {
                best = (current, state.clone());
            }
        }
        if it % mh.thin == 0 {
            trace.push(current);
        }
        if it >= mh.burn_in && (it - mh.burn_in) % mh.thin == 0 {
            sum += &state;
            n_kept += 1;
        }
    }

    let estimate = match mh.estimator {
        Estimator::PosteriorMean => sum / n_kept as f64,
        Estimator::Map => best.1,
    };
    if estimate.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimated weights are not finite".into()));
    }
    Ok(DensityFit {
        weights: estimate.rows(0, k).iter().copied().collect(),
        offset: estimate[k],
        basis_id: basis.id(),
        diagnostics: Diagnostics {
            acceptance_rate: accepted as f64 / mh.n_iterations as f64,
            n_iterations: mh.n_iterations,
            burn_in: mh.burn_in,
            objective_trace: trace,
        },
    })
}

/// Seeds used for one step: `(noise seed, sampler seed)`. Derived from the
/// time label, so a step's fit does not depend on where it sits in the series.
pub fn step_seeds(noise: &NoiseConfig, mh: &MhConfig, time_label: &str) -> (u64, u64) {
    (
        seeds::derive(noise.seed, time_label),
        seeds::derive(mh.seed, time_label),
    )
}

/// One fit per step with a shared basis and a shared noise box.
pub fn fit_series(
    series: &VectorSetSeries,
    basis: &FeatureBasis,
    noise: &NoiseConfig,
    mh: &MhConfig,
) -> Result<Vec<DensityFit>> {
    if series.is_empty() {
        return Err(Error::insufficient("empty series"));
    }
    if series.dim() != basis.dim() {
        return Err(Error::invalid(format!(
            "series '{}' is {}-D, basis is {}-D",
            series.instance_label(),
            series.dim(),
            basis.dim()
        )));
    }
    series
        .steps()
        .par_iter()
        .map(|step| {
            let (noise_seed, mh_seed) = step_seeds(noise, mh, &step.time_label);
            let step_noise = NoiseConfig {
                seed: noise_seed,
                ..noise.clone()
            };
            let step_mh = MhConfig {
                seed: mh_seed,
                ..mh.clone()
            };
            fit_weights(&step.points, basis, &step_noise, &step_mh).map_err(|e| match e {
                Error::InsufficientData(m) => Error::InsufficientData(format!(
                    "{} step {}: {m}",
                    series.instance_label(),
                    step.time_label
                )),
                Error::NonFinite(m) => Error::NonFinite(format!(
                    "{} step {}: {m}",
                    series.instance_label(),
                    step.time_label
                )),
                other => other,
            })
        })
        .collect()
}

/// Runs the sampler on precomputed feature matrices. Either matrix may be
/// empty, which leaves only the prior.
pub fn fit_features(
    pos_feats: DMatrix<f64>,
    neg_feats: DMatrix<f64>,
    basis: &FeatureBasis,
    mh: &MhConfig,
) -> Result<DensityFit> {
    mh.validate()?;
    check_shapes(basis.k(), &pos_feats, &neg_feats)?;
    run_chain(&Problem::new(pos_feats, neg_feats), basis, mh)
}
