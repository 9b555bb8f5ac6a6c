//! Proximal operator of the spectral norm:
//! `argmin_B ||B - C||_F^2 + lambda ||B||_2`.
//!
//! The minimizer shares C's singular vectors, and its singular values flatten
//! the top k values of C onto a common plateau t. For each candidate k the
//! optimal plateau is the first-order value `(sum_{j<=k} sigma_j - lambda/2)/k`
//! clamped to `[sigma_{k+1}, sigma_k]`; the best k wins by direct loss
//! comparison.

use ndarray::Array2;

use crate::linalg::svd;

/// Evaluates the prox. `lambda = 0` returns `c` unchanged; `c = 0` maps to 0.
pub fn spectral_prox(c: &Array2<f64>, lambda: f64) -> Array2<f64> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    if lambda == 0.0 {
        return c.clone();
    }
    if c.iter().all(|&v| v == 0.0) {
        return Array2::zeros(c.dim());
    }
    let (u, sigma, vt) = svd(c).expect("svd of a finite matrix");
    let s = shrink_singular_values(sigma.as_slice().unwrap(), lambda);
    let mut us = u;
    for (j, &sj) in s.iter().enumerate() {
        us.column_mut(j).mapv_inplace(|v| v * sj);
    }
    us.dot(&vt)
}

/// The shrunken singular values `(t, ..., t, sigma_{k+1}, ..., sigma_r)`.
pub(crate) fn shrink_singular_values(sigma: &[f64], lambda: f64) -> Vec<f64> {
    let r = sigma.len();
    let mut best_loss = f64::INFINITY;
    let mut best = (0usize, 0.0f64);
    let mut prefix = 0.0;
    for k in 1..=r {
        prefix += sigma[k - 1];
        let lo = if k < r { sigma[k] } else { 0.0 };
        let hi = sigma[k - 1];
        let t = ((prefix - lambda / 2.0) / k as f64).clamp(lo, hi);
        let loss: f64 = sigma[..k].iter().map(|&sj| (sj - t) * (sj - t)).sum::<f64>() + lambda * t;
        if loss < best_loss {
            best_loss = loss;
            best = (k, t);
        }
    }
    let (k, t) = best;
    let mut out = sigma.to_vec();
    for s in out.iter_mut().take(k) {
        *s = t;
    }
    out
}
