//! Density fits for time-indexed vector sets.
//!
//! Each point set is modeled as `p(x) ∝ σ(φ(x)·w)` where `φ` is a random
//! Fourier feature map shared across all time steps. The weights `w` are
//! estimated contrastively against uniform noise with a random-walk
//! Metropolis-Hastings sampler, and the resulting weight vectors are
//! jointly projected with PCA to give per-instance trajectories.

pub mod contrastive;
pub mod density;
pub mod error;
pub mod fitfile;
pub mod ingest;
pub mod rff;
pub mod seeds;
mod serial;
pub mod series;
pub mod synthetic;
pub mod trajectory;

pub use contrastive::{fit_series, fit_weights, Estimator, MhConfig, NoiseConfig};
pub use density::{evaluate_grid, DensityFit, GridDensity, GridSpec};
pub use error::{Error, ErrorKind, Result};
pub use rff::{FeatureBasis, PhaseRange};
pub use series::{Step, VectorSetSeries};

