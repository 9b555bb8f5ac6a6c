//! Long-only minimum-variance allocation:
//! `min w' Sigma w  s.t.  w'1 = 1, w >= 0`,
//! solved by accelerated projected gradient with exact Euclidean projection
//! onto the simplex.

use ndarray::{Array1, Array2};

use super::WeightVector;
use crate::datamodel::CovarianceEstimate;
use crate::error::{Error, Result};
use crate::linalg::eigh;

const KKT_TOL: f64 = 1e-9;
const MAX_ITER: usize = 200_000;

/// Solves the long-only QP. The covariance is symmetrized and eigenvalue
/// clipped; anything below -1e-8 is rejected as not PSD.
pub fn min_variance_weights(cov: &CovarianceEstimate) -> Result<WeightVector> {
    min_variance_weights_named(cov, None)
}

/// As [`min_variance_weights`], with explicit ticker names for the output.
pub fn min_variance_weights_named(
    cov: &CovarianceEstimate,
    tickers: Option<&[String]>,
) -> Result<WeightVector> {
    let k = cov.dim();
    if k == 0 {
        return Err(Error::InvalidInput("empty covariance".into()));
    }
    let names: Vec<String> = match tickers {
        Some(t) if t.len() == k => t.to_vec(),
        Some(t) => {
            return Err(Error::InvalidInput(format!(
                "{} tickers for {k} assets",
                t.len()
            )))
        }
        None => (0..k).map(|i| format!("a{i}")).collect(),
    };
    if k == 1 {
        return WeightVector::new(names, vec![1.0]);
    }

    // symmetric clipping attempt
    let (vals, vecs) = eigh(cov.matrix())?;
    let scale = vals[k - 1].abs().max(1.0);
    if vals[0] < -1e-8 * scale {
        return Err(Error::InvalidCovariance(format!(
            "eigenvalue {} below the PSD tolerance",
            vals[0]
        )));
    }
    let mut sigma = Array2::<f64>::zeros((k, k));
    for (j, &lam) in vals.iter().enumerate() {
        let l = lam.max(0.0);
        if l == 0.0 {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                sigma[[a, b]] += l * vecs[[a, j]] * vecs[[b, j]];
            }
        }
    }
    let lip = 2.0 * vals[k - 1].max(1e-300);

    let mut w = Array1::<f64>::from_elem(k, 1.0 / k as f64);
    let mut y = w.clone();
    let mut momentum = 1.0f64;
    for _ in 0..MAX_ITER {
        let grad = sigma.dot(&y) * 2.0;
        let mut w_next = &y - &(&grad / lip);
        project_to_simplex(w_next.as_slice_mut().unwrap());

        // gradient restart
        let along: f64 = grad
            .iter()
            .zip(w_next.iter().zip(w.iter()))
            .map(|(g, (nw, ow))| g * (nw - ow))
            .sum();
        let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if along > 0.0 {
            y = w_next.clone();
            momentum = 1.0;
        } else {
            let beta = (momentum - 1.0) / momentum_next;
            y = &w_next + &((&w_next - &w) * beta);
            momentum = momentum_next;
        }
        w = w_next;

        if kkt_residual(&sigma, &w) <= KKT_TOL {
            return WeightVector::new(names, w.to_vec());
        }
    }
    Err(Error::SolverStalled(format!(
        "minimum-variance QP residual {:e} after {MAX_ITER} iterations",
        kkt_residual(&sigma, &w)
    )))
}

/// KKT residual for the simplex QP: with g = 2 Sigma w and the multiplier
/// estimate mu = w'g, stationarity needs g_i >= mu with equality on the
/// support.
fn kkt_residual(sigma: &Array2<f64>, w: &Array1<f64>) -> f64 {
    let grad = sigma.dot(w) * 2.0;
    let mu: f64 = w.iter().zip(grad.iter()).map(|(wi, gi)| wi * gi).sum();
    let mut resid = 0.0f64;
    for (wi, gi) in w.iter().zip(grad.iter()) {
        resid = resid.max((mu - gi).max(0.0)); // dual feasibility
        resid = resid.max(wi * (gi - mu).abs()); // complementary slackness
    }
    let sum: f64 = w.iter().sum();
    resid.max((sum - 1.0).abs())
}

/// Exact Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &mut [f64]) {
    debug_assert!(!v.is_empty());
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i as f64 + 1.0);
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 && (total - 1.0).abs() > 1e-15 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}
