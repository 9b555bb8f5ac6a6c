//! Data-driven selection of the robustness radius.
//!
//! The radius is the (1-alpha) quantile of `R_bar / n`, where
//! `R_bar = sum_i (1/4) Z_i' Sigma^{-1} Z_i` and `Z ~ N(0, Upsilon_g)` is the
//! Gaussian limit of the centered second moments `g(X) = XX'`. Two Upsilon
//! estimators are available: the full sample covariance of the vectorized
//! second moments (method a, O(d^4) memory) and the Wishart diagonal formula
//! `(Upsilon)_{ij,ij} = sigma_ii sigma_jj + sigma_ij^2` (method b, the
//! default). `Sigma^{-1}` is approximated by inverting only the diagonal,
//! which for standardized panels is close to the identity.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{sample_second_moment, StandardizedPanel};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};

/// Which Upsilon estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsilonMethod {
    /// Sample covariance of the vectorized second moments; needs n > d^2
    /// observations to be positive definite and d^4 floats of memory.
    FullSampleCovariance,
    /// Diagonal-only estimator from the Wishart variance formula.
    WishartDiagonal,
}

/// Estimated covariance structure of the limiting Gaussian matrix Z.
#[derive(Debug, Clone, PartialEq)]
pub enum UpsilonEstimate {
    /// (d*d) x (d*d) covariance over vec(g(X)), row-major pairing.
    Full { cov: Array2<f64>, d: usize },
    /// d x d matrix of per-entry variances; cross-covariances are zero.
    Diagonal { variances: Array2<f64> },
}

impl UpsilonEstimate {
    pub fn dim(&self) -> usize {
        match self {
            UpsilonEstimate::Full { d, .. } => *d,
            UpsilonEstimate::Diagonal { variances } => variances.nrows(),
        }
    }
}

/// Default memory cap for method (a): 2 GiB.
pub const DEFAULT_MEM_CAP_BYTES: usize = 2 << 30;

/// Estimates Upsilon_g from a standardized panel.
pub fn estimate_upsilon(
    panel: &StandardizedPanel,
    method: UpsilonMethod,
    mem_cap_bytes: usize,
) -> Result<UpsilonEstimate> {
    let d = panel.d();
    let n = panel.n();
    match method {
        UpsilonMethod::WishartDiagonal => {
            let sigma = sample_second_moment(panel);
            let s = sigma.matrix();
            let mut variances = Array2::<f64>::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    variances[[i, j]] = s[[i, i]] * s[[j, j]] + s[[i, j]] * s[[i, j]];
                }
            }
            Ok(UpsilonEstimate::Diagonal { variances })
        }
        UpsilonMethod::FullSampleCovariance => {
            let required = d
                .checked_pow(4)
                .and_then(|c| c.checked_mul(8))
                .ok_or(Error::MemoryCapExceeded {
                    required: usize::MAX,
                    cap: mem_cap_bytes,
                })?;
            if required > mem_cap_bytes {
                return Err(Error::MemoryCapExceeded {
                    required,
                    cap: mem_cap_bytes,
                });
            }
            let x = panel.values();
            let p = d * d;
            // vectorized second moments, one row per observation
            let mut v = Array2::<f64>::zeros((n, p));
            for t in 0..n {
                for i in 0..d {
                    for j in 0..d {
                        v[[t, i * d + j]] = x[[t, i]] * x[[t, j]];
                    }
                }
            }
            let mean = v.mean_axis(ndarray::Axis(0)).unwrap();
            let mut cov = Array2::<f64>::zeros((p, p));
            for t in 0..n {
                for a in 0..p {
                    let da = v[[t, a]] - mean[a];
                    for b in a..p {
                        cov[[a, b]] += da * (v[[t, b]] - mean[b]);
                    }
                }
            }
            let denom = (n as f64) - 1.0;
            for a in 0..p {
                for b in a..p {
                    let val = cov[[a, b]] / denom;
                    cov[[a, b]] = val;
                    cov[[b, a]] = val;
                }
            }
            Ok(UpsilonEstimate::Full { cov, d })
        }
    }
}

/// Draws `m` samples of `R_bar = sum_i (1/4) Z_i' diag(sigma_inv) Z_i`.
///
/// Under the diagonal estimator, Z is sampled entrywise on the upper triangle
/// (including the diagonal) and mirrored, since the limit of symmetric
/// matrices is symmetric. Draws are parallel over a partitioned seed
/// sequence and merged by index, so thread count never changes results.
pub fn sample_rbar(
    upsilon: &UpsilonEstimate,
    sigma_inv_diag: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = upsilon.dim();
    if sigma_inv_diag.len() != d {
        return Err(Error::InvalidInput(format!(
            "sigma_inv_diag has {} entries for d = {d}",
            sigma_inv_diag.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    if sigma_inv_diag.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidUpsilon("nonpositive entry in sigma_inv_diag".into()));
    }

    match upsilon {
        UpsilonEstimate::Diagonal { variances } => {
            if variances.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidUpsilon("negative variance".into()));
            }
            let sds = variances.mapv(f64::sqrt);
            let samples: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|idx| {
                    let mut rng = rng_from_seed(derive_seed(seed, idx as u64));
                    let mut z = Array2::<f64>::zeros((d, d));
                    for i in 0..d {
                        for j in i..d {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            let v = g * sds[[i, j]];
                            z[[i, j]] = v;
                            z[[j, i]] = v;
                        }
                    }
                    quadratic_form(&z, sigma_inv_diag)
                })
                .collect();
            Ok(samples)
        }
        UpsilonEstimate::Full { cov, d } => {
            let d = *d;
            let p = d * d;
            // PSD square root via eigendecomposition; small negative
            // eigenvalues from sampling noise are clipped
            let (vals, vecs) = crate::linalg::eigh(cov)?;
            if vals[0] < -1e-8 * vals[vals.len() - 1].abs().max(1.0) {
                return Err(Error::InvalidUpsilon(format!(
                    "full covariance has eigenvalue {}",
                    vals[0]
                )));
            }
            let mut root = vecs.clone();
            for (j, &lam) in vals.iter().enumerate() {
                let s = lam.max(0.0).sqrt();
                root.column_mut(j).mapv_inplace(|v| v * s);
            }
            let samples: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|idx| {
                    let mut rng = rng_from_seed(derive_seed(seed, idx as u64));
                    let eps =
                        Array1::from_shape_fn(p, |_| -> f64 { StandardNormal.sample(&mut rng) });
                    let zv = root.dot(&eps);
                    let mut z = Array2::<f64>::zeros((d, d));
                    for i in 0..d {
                        for j in 0..d {
                            z[[i, j]] = zv[i * d + j];
                        }
                    }
                    // g is symmetric; average out eigendecomposition rounding
                    for i in 0..d {
                        for j in (i + 1)..d {
                            let s = 0.5 * (z[[i, j]] + z[[j, i]]);
                            z[[i, j]] = s;
                            z[[j, i]] = s;
                        }
                    }
                    quadratic_form(&z, sigma_inv_diag)
                })
                .collect();
            Ok(samples)
        }
    }
}

/// `sum_i (1/4) Z_{.i}' diag(w) Z_{.i}` = `(1/4) sum_{j,i} w_j Z_{ji}^2`.
fn quadratic_form(z: &Array2<f64>, w: &[f64]) -> f64 {
    let d = z.nrows();
    let mut acc = 0.0;
    for j in 0..d {
        let wj = w[j];
        for i in 0..d {
            acc += wj * z[[j, i]] * z[[j, i]];
        }
    }
    0.25 * acc
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (sorted.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = h - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Turns R-bar samples into a radius: the (1-alpha) quantile of `R_bar / n`.
pub fn delta_from_samples(rbar: &[f64], alpha: f64, n: usize) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} outside (0, 1)")));
    }
    if rbar.is_empty() || n == 0 {
        return Err(Error::InvalidInput("empty samples or n = 0".into()));
    }
    Ok(quantile(rbar, 1.0 - alpha) / n as f64)
}

/// Controls for [`select_delta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaConfig {
    pub alpha: f64,
    pub samples: usize,
    pub method: UpsilonMethod,
    pub mem_cap_bytes: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            samples: 1000,
            method: UpsilonMethod::WishartDiagonal,
            mem_cap_bytes: DEFAULT_MEM_CAP_BYTES,
        }
    }
}

/// Summary quantiles of the sampled `R_bar / n` distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// A selected radius with its Monte Carlo provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub alpha: f64,
    pub samples: usize,
    pub method: UpsilonMethod,
    pub seed: u64,
    pub samples_summary: SamplesSummary,
}

/// The five-step radius recipe: second moments, diagonal-inverse Sigma,
/// Upsilon estimate, Monte Carlo draws of R-bar, and the (1-alpha) quantile
/// of `R_bar / n`.
pub fn select_delta(
    panel: &StandardizedPanel,
    config: &DeltaConfig,
    seed: u64,
) -> Result<DeltaEstimate> {
    if !(0.0 < config.alpha && config.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha = {} outside (0, 1)",
            config.alpha
        )));
    }
    let sigma = sample_second_moment(panel);
    let sigma_inv_diag: Vec<f64> = (0..panel.d())
        .map(|i| {
            let v = sigma.matrix()[[i, i]];
            if v <= 0.0 {
                Err(Error::InvalidUpsilon(format!("sigma_{i}{i} = {v}")))
            } else {
                Ok(1.0 / v)
            }
        })
        .collect::<Result<_>>()?;
    let upsilon = estimate_upsilon(panel, config.method, config.mem_cap_bytes)?;
    let rbar = sample_rbar(&upsilon, &sigma_inv_diag, config.samples, seed)?;
    let delta = delta_from_samples(&rbar, config.alpha, panel.n())?;
    let scaled: Vec<f64> = rbar.iter().map(|r| r / panel.n() as f64).collect();
    Ok(DeltaEstimate {
        delta,
        alpha: config.alpha,
        samples: config.samples,
        method: config.method,
        seed,
        samples_summary: SamplesSummary {
            min: quantile(&scaled, 0.0),
            q25: quantile(&scaled, 0.25),
            median: quantile(&scaled, 0.5),
            q75: quantile(&scaled, 0.75),
            max: quantile(&scaled, 1.0),
        },
    })
}
