//! Distributionally robust nodewise regression.
//!
//! The robust regression over a Wasserstein ball of radius delta relaxes to
//! the convex program
//!
//! ```text
//! min_{diag(B)=0}  ( ||X - XB||_F / sqrt(n) + sqrt(delta) ||I - B||_2 )^2
//! ```
//!
//! solved here by ADMM on the splitting `B1 + B2 = I` with `diag(B1) = 0`:
//! a strongly convex first-order subproblem for the regression block and a
//! closed-form spectral-norm proximal step for the regularizer block.

mod admm;
mod prox;

pub use admm::{admm_fit, solve_b1, AdmmState};
pub use prox::spectral_prox;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datamodel::StandardizedPanel;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// d x d regression coefficients with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: Array2<f64>,
}

impl CoefficientMatrix {
    /// Validates finiteness and the zero diagonal.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::InvalidInput(format!(
                "coefficient matrix must be square, got {r}x{c}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        for i in 0..r {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry {i} is {} (must be exactly 0)",
                    values[[i, i]]
                )));
            }
        }
        Ok(Self { values })
    }

    /// Builds from an arbitrary square matrix by zeroing the diagonal.
    pub fn from_dense(mut values: Array2<f64>) -> Result<Self> {
        for i in 0..values.nrows().min(values.ncols()) {
            values[[i, i]] = 0.0;
        }
        Self::new(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            values: Array2::zeros((d, d)),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// `I - B`, the matrix whose spectral norm the relaxation penalizes.
    pub fn i_minus_b(&self) -> Array2<f64> {
        let d = self.dim();
        let mut h = -&self.values;
        for i in 0..d {
            h[[i, i]] = 1.0;
        }
        h
    }
}

/// ADMM and inner-solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// ADMM penalty parameter.
    pub rho: f64,
    /// Absolute residual tolerance.
    pub tol_abs: f64,
    /// Relative residual tolerance.
    pub tol_rel: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Stationarity tolerance of the B1 subproblem.
    pub inner_tol: f64,
    /// Inner iteration cap of the B1 subproblem.
    pub inner_max_iter: usize,
    /// Residual norm below which the square-root loss is treated as flat.
    pub smoothing_eps: f64,
    /// Residual balancing: double/halve rho when one residual exceeds 10x
    /// the other. Off by default; the fixed rho matches the reference runs.
    pub adaptive_rho: bool,
    /// Record the square-root objective at every iteration (costs one extra
    /// SVD per iteration; meant for diagnostics and tests).
    pub track_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol_abs: 1e-6,
            tol_rel: 1e-4,
            max_iter: 5000,
            inner_tol: 1e-8,
            inner_max_iter: 2000,
            smoothing_eps: 1e-12,
            adaptive_rho: false,
            track_objective: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let all_positive = self.rho > 0.0
            && self.tol_abs > 0.0
            && self.tol_rel > 0.0
            && self.max_iter > 0
            && self.inner_tol > 0.0
            && self.inner_max_iter > 0
            && self.smoothing_eps > 0.0;
        if !all_positive {
            return Err(Error::InvalidInput("solver options must be positive".into()));
        }
        Ok(())
    }
}

/// The relaxed robust objective
/// `( ||X - XB||_F / sqrt(n) + sqrt(delta) ||I - B||_2 )^2`.
pub fn dro_objective(panel: &StandardizedPanel, b: &CoefficientMatrix, delta: f64) -> Result<f64> {
    if b.dim() != panel.d() {
        return Err(Error::InvalidInput(format!(
            "coefficients are {}x{} but the panel has {} columns",
            b.dim(),
            b.dim(),
            panel.d()
        )));
    }
    if delta < 0.0 {
        return Err(Error::InvalidInput("delta must be nonnegative".into()));
    }
    Ok(sqrt_objective(panel, b, delta).powi(2))
}

/// The equivalent square-root form
/// `||X - XB||_F / sqrt(n) + sqrt(delta) ||I - B||_2`; same argmin.
pub fn sqrt_objective(panel: &StandardizedPanel, b: &CoefficientMatrix, delta: f64) -> f64 {
    let x = panel.values();
    let resid = x - &x.dot(b.values());
    let fro = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = spectral_norm(&b.i_minus_b());
    fro / (panel.n() as f64).sqrt() + delta.sqrt() * spec
}
