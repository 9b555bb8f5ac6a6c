//! Reference clusterers: nodewise Lasso (sparse subspace clustering),
//! dissimilarity-based agglomerative clustering, and k-medoids.

mod kmedoids;
mod lasso;
mod linkage;

pub use kmedoids::{kmedoids, kmedoids_with_details};
pub use lasso::{default_lambda_grid, lasso_cv, lasso_nodewise, LassoConfig};
pub use linkage::acc_cluster;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datamodel::StandardizedPanel;
use crate::error::{Error, Result};

/// Which dissimilarity a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DissimilarityKind {
    /// `cord(i,j) = min(max_l |rho_il - rho_jl|, max_l |rho_il + rho_jl|)`,
    /// both maxima over l outside {i, j}.
    Cord,
    /// `1 - rho_ij^2`.
    OneMinusRhoSquared,
}

/// A d x d symmetric nonnegative dissimilarity with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: Array2<f64>,
    kind: DissimilarityKind,
}

impl DissimilarityMatrix {
    pub fn new(values: Array2<f64>, kind: DissimilarityKind) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::InvalidInput(format!(
                "dissimilarity must be square, got {r}x{c}"
            )));
        }
        for i in 0..r {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..r {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) = {v}")));
                }
                if (v - values[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values, kind })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> DissimilarityKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// Sample correlation matrix of a standardized panel. With unit-variance
/// columns this is the second-moment matrix clamped to [-1, 1].
pub(crate) fn correlation_matrix(panel: &StandardizedPanel) -> Array2<f64> {
    let x = panel.values();
    let n = panel.n() as f64;
    let mut rho = x.t().dot(x) / (n - 1.0);
    for i in 0..rho.nrows() {
        rho[[i, i]] = 1.0;
        for j in 0..rho.ncols() {
            rho[[i, j]] = rho[[i, j]].clamp(-1.0, 1.0);
        }
    }
    for i in 0..rho.nrows() {
        for j in (i + 1)..rho.ncols() {
            let s = 0.5 * (rho[[i, j]] + rho[[j, i]]);
            rho[[i, j]] = s;
            rho[[j, i]] = s;
        }
    }
    rho
}

/// The correlation-profile dissimilarity: two variables are close when their
/// correlation patterns to all third variables match up to a global sign.
pub fn cord_dissimilarity(panel: &StandardizedPanel) -> Result<DissimilarityMatrix> {
    let d = panel.d();
    if d < 3 {
        return Err(Error::InsufficientVariables { needed: 3, got: d });
    }
    let rho = correlation_matrix(panel);
    let mut out = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in (i + 1)..d {
            let mut max_diff = 0.0f64;
            let mut max_sum = 0.0f64;
            for l in 0..d {
                if l == i || l == j {
                    continue;
                }
                max_diff = max_diff.max((rho[[i, l]] - rho[[j, l]]).abs());
                max_sum = max_sum.max((rho[[i, l]] + rho[[j, l]]).abs());
            }
            let v = max_diff.min(max_sum);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    DissimilarityMatrix::new(out, DissimilarityKind::Cord)
}

/// The `1 - rho^2` distance used by the k-medoids baseline.
pub fn correlation_dissimilarity(panel: &StandardizedPanel) -> Result<DissimilarityMatrix> {
    let d = panel.d();
    let rho = correlation_matrix(panel);
    let mut out = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            if i != j {
                out[[i, j]] = (1.0 - rho[[i, j]] * rho[[i, j]]).max(0.0);
            }
        }
    }
    DissimilarityMatrix::new(out, DissimilarityKind::OneMinusRhoSquared)
}
