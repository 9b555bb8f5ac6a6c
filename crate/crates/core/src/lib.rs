//! Variable clustering via distributionally robust nodewise regression.
//!
//! The pipeline: standardize an observation panel, pick the robustness
//! radius from the data, solve the spectral-norm-regularized nodewise
//! regression by ADMM, symmetrize the coefficients into a similarity graph,
//! and spectral-cluster it. Baseline clusterers (nodewise Lasso, dissimilarity
//! linkage, k-medoids), a synthetic block-model generator with population
//! oracles, AMI scoring, and a cluster-driven minimum-variance backtester
//! round out the toolkit.

pub mod baselines;
pub mod cluster;
pub mod datamodel;
pub mod delta;
pub mod dro;
pub mod error;
pub mod io;
pub mod linalg;
pub mod portfolio;
pub mod seeding;

pub use error::{Error, Result};
