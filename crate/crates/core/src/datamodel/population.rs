//! Population-level oracles for the block model: the exact covariance implied
//! by a spec and the exact nodewise regression coefficients implied by a
//! covariance. Ground-truth anchors for the estimation pipeline.

use ndarray::{Array1, Array2};

use super::{BlockModelSpec, CovarianceEstimate, CovarianceKind};
use crate::dro::CoefficientMatrix;
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Population covariance of the block model:
/// `Sigma = A Sigma_F A' + beta_H beta_H' + Gamma`.
/// The middle term vanishes when no variable loads on the global factor.
pub fn population_covariance(spec: &BlockModelSpec) -> Result<CovarianceEstimate> {
    spec.validate()?;
    let a = &spec.loadings;
    let mut sigma = a.dot(&spec.factor_cov).dot(&a.t());
    let d = spec.d();
    for i in 0..d {
        for j in 0..d {
            sigma[[i, j]] += spec.common_loading[i] * spec.common_loading[j];
        }
        sigma[[i, i]] += spec.noise_var[i];
    }
    // exact symmetry despite floating-point matmul ordering
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
            sigma[[i, j]] = s;
            sigma[[j, i]] = s;
        }
    }
    CovarianceEstimate::new(sigma, CovarianceKind::Population)
}

/// Exact nodewise regression coefficients at the population level: column i
/// solves `min_b E||X_i - X' b||^2` subject to `b_ii = 0`, i.e.
/// `b_{-i,i} = Sigma_{-i,-i}^{-1} Sigma_{-i,i}`.
pub fn population_nodewise(sigma: &CovarianceEstimate) -> Result<CoefficientMatrix> {
    let s = sigma.matrix();
    let d = sigma.dim();
    if d < 2 {
        return Err(Error::InvalidInput("need at least 2 variables".into()));
    }
    let mut b = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();
        let mut sub = Array2::<f64>::zeros((d - 1, d - 1));
        let mut rhs = Array1::<f64>::zeros(d - 1);
        for (r, &jr) in others.iter().enumerate() {
            rhs[r] = s[[jr, i]];
            for (c, &jc) in others.iter().enumerate() {
                sub[[r, c]] = s[[jr, jc]];
            }
        }
        let factor = SpdFactor::new(&sub).map_err(|_| Error::SingularCovariance)?;
        let coef = factor.solve(&rhs);
        if coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        for (r, &jr) in others.iter().enumerate() {
            b[[jr, i]] = coef[r];
        }
    }
    CoefficientMatrix::new(b)
}
