//! Synthetic multi-factor block model generator.
//!
//! Each variable is a linear combination of its cluster's latent factors,
//! an optional hidden global factor, and idiosyncratic Gaussian noise:
//!
//! ```text
//! x_i = F_G^{z(i)} beta_G(i) + beta_H(i) f_H + eps_i
//! ```
//!
//! Cluster sizes are multinomial with equal probabilities; factors are drawn
//! from a shared pool of i.i.d. standard normal n-vectors (so two clusters
//! may share factors); loadings satisfy `||beta_G(i)||^2 + beta_H(i)^2 = 1`.
//! The emitted panel is standardized column by column.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{standardize_with_ids, BlockModelSpec, Partition, StandardizedPanel};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// How many latent factors each cluster gets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorCountRule {
    /// The same d_k for every cluster; must satisfy d_k <= m_k - 1.
    Fixed(usize),
    /// Uniform integer in 1..=min(m_k - 1, n - 1).
    UniformRandom,
}

/// Law of the squared common-factor loading beta_H(i)^2.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommonLoadingLaw {
    /// beta_H(i)^2 fixed at the given value (0 disables the global factor).
    FixedSquared(f64),
    /// beta_H(i)^2 ~ Uniform[0, max] independently per variable.
    UniformSquared { max: f64 },
}

/// Law of the idiosyncratic noise variance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseLaw {
    Fixed(f64),
    /// Var(eps_i) ~ Uniform[0, max] independently per variable.
    Uniform { max: f64 },
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockModelConfig {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub factor_rule: FactorCountRule,
    pub common_loading: CommonLoadingLaw,
    pub noise: NoiseLaw,
    /// Multinomial redraws allowed before giving up on a usable size vector.
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
}

fn default_max_retries() -> usize {
    100
}

impl BlockModelConfig {
    /// The main simulation design: no global factor, fixed noise variance,
    /// d_k uniform in 1..=m_k-1.
    pub fn basic(d: usize, k: usize, n: usize, noise_var: f64) -> Self {
        Self {
            d,
            k,
            n,
            factor_rule: FactorCountRule::UniformRandom,
            common_loading: CommonLoadingLaw::FixedSquared(0.0),
            noise: NoiseLaw::Fixed(noise_var),
            max_retries: 100,
        }
    }

    /// The heterogeneous design: beta_H(i)^2 and Var(eps_i) both uniform on
    /// [0, 0.5] per variable.
    pub fn heterogeneous(d: usize, k: usize, n: usize) -> Self {
        Self {
            d,
            k,
            n,
            factor_rule: FactorCountRule::UniformRandom,
            common_loading: CommonLoadingLaw::UniformSquared { max: 0.5 },
            noise: NoiseLaw::Uniform { max: 0.5 },
            max_retries: 100,
        }
    }
}

/// Draws a panel from the multi-factor block model together with the true
/// partition and the generative spec. Deterministic in `seed`.
pub fn generate_block_model(
    config: &BlockModelConfig,
    seed: u64,
) -> Result<(StandardizedPanel, Partition, BlockModelSpec)> {
    let (raw, spec) = draw_raw(config, seed)?;
    let partition = spec.partition();
    let ids = (0..config.d).map(|j| format!("x{j}")).collect();
    let panel = standardize_with_ids(&raw, ids)?;
    Ok((panel, partition, spec))
}

/// Same draw, but returns the unstandardized matrix. Used by tests that
/// compare the sample covariance against the population covariance.
#[cfg(test)]
pub(crate) fn generate_block_model_raw(
    config: &BlockModelConfig,
    seed: u64,
) -> Result<(Array2<f64>, BlockModelSpec)> {
    draw_raw(config, seed)
}

fn draw_raw(config: &BlockModelConfig, seed: u64) -> Result<(Array2<f64>, BlockModelSpec)> {
    let BlockModelConfig { d, k, n, .. } = *config;
    if k == 0 || d < k {
        return Err(Error::InvalidSpec(format!("need d >= K >= 1, got d={d} K={k}")));
    }
    if n < 2 {
        return Err(Error::InvalidSpec(format!("need n >= 2, got n={n}")));
    }
    let mut rng = rng_from_seed(seed);

    // Multinomial cluster sizes with equal probabilities. A size vector is
    // usable only if every cluster can hold at least one proper factor
    // subspace (m_k >= 2); resample a bounded number of times otherwise.
    let mut sizes: Option<Vec<usize>> = None;
    for _ in 0..config.max_retries.max(1) {
        let mut counts = vec![0usize; k];
        for _ in 0..d {
            counts[rng.gen_range(0..k)] += 1;
        }
        if counts.iter().all(|&m| m >= 2) {
            sizes = Some(counts);
            break;
        }
    }
    let cluster_sizes = sizes.ok_or_else(|| {
        Error::InvalidSpec(format!(
            "could not draw multinomial sizes with every cluster >= 2 after {} tries",
            config.max_retries
        ))
    })?;

    // Factor counts per cluster. The n-1 cap keeps each subspace proper
    // inside R^n.
    let mut factor_counts = Vec::with_capacity(k);
    for &m in &cluster_sizes {
        let cap = (m - 1).min(n - 1);
        let dk = match config.factor_rule {
            FactorCountRule::Fixed(f) => {
                if f == 0 || f > cap {
                    return Err(Error::InvalidSpec(format!(
                        "fixed factor count {f} infeasible for cluster of size {m} (cap {cap})"
                    )));
                }
                f
            }
            FactorCountRule::UniformRandom => rng.gen_range(1..=cap),
        };
        factor_counts.push(dk);
    }
    let total_factors: usize = factor_counts.iter().sum();

    // Pool of min(n, d) candidate factors, i.i.d. standard normal n-vectors.
    let pool_size = n.min(d);
    let mut pool = Array2::<f64>::zeros((n, pool_size));
    for v in pool.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }

    // Each cluster picks d_k distinct pool factors; the draws are independent
    // across clusters, so clusters may share factors.
    let mut pool_choice: Vec<Vec<usize>> = Vec::with_capacity(k);
    for (ki, &dk) in factor_counts.iter().enumerate() {
        if dk > pool_size {
            return Err(Error::InvalidSpec(format!(
                "cluster {ki} wants {dk} factors but the pool has {pool_size}"
            )));
        }
        pool_choice.push(sample_without_replacement(&mut rng, pool_size, dk));
    }

    // Population factor covariance: pool factors are independent with unit
    // variance, so entries are 1 exactly where two slots picked the same
    // pool factor.
    let flat: Vec<usize> = pool_choice.iter().flatten().copied().collect();
    let mut factor_cov = Array2::<f64>::zeros((total_factors, total_factors));
    for a in 0..total_factors {
        for b in 0..total_factors {
            factor_cov[[a, b]] = if flat[a] == flat[b] { 1.0 } else { 0.0 };
        }
    }

    let mut loadings = Array2::<f64>::zeros((d, total_factors));
    let mut common_loading = vec![0.0; d];
    let mut noise_var = vec![0.0; d];
    let mut raw = Array2::<f64>::zeros((n, d));
    let mut global = vec![0.0; n];
    for g in global.iter_mut() {
        *g = StandardNormal.sample(&mut rng);
    }

    let unit = Uniform::new_inclusive(0.0, 1.0);
    let mut col = 0usize;
    let mut offset = 0usize;
    for ki in 0..k {
        let dk = factor_counts[ki];
        for _ in 0..cluster_sizes[ki] {
            let bh2 = match config.common_loading {
                CommonLoadingLaw::FixedSquared(v) => v,
                CommonLoadingLaw::UniformSquared { max } => max * unit.sample(&mut rng),
            };
            if !(0.0..=1.0).contains(&bh2) {
                return Err(Error::InvalidSpec(format!("beta_H^2 = {bh2} outside [0, 1]")));
            }
            let bh = bh2.sqrt();
            // beta_G standard normal, then the final loading vector is
            // normalized jointly with beta_H.
            let mut beta: Vec<f64> = (0..dk).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidSpec("degenerate zero loading draw".into()));
            }
            let scale = (1.0 - bh2).max(0.0).sqrt() / norm;
            for b in beta.iter_mut() {
                *b *= scale;
            }

            let var_eps = match config.noise {
                NoiseLaw::Fixed(v) => v,
                NoiseLaw::Uniform { max } => max * unit.sample(&mut rng),
            };
            if var_eps < 0.0 {
                return Err(Error::InvalidSpec("negative noise variance".into()));
            }
            let sd_eps = var_eps.sqrt();

            for (slot, b) in beta.iter().enumerate() {
                loadings[[col, offset + slot]] = *b;
            }
            common_loading[col] = bh;
            noise_var[col] = var_eps;

            for t in 0..n {
                let mut v = bh * global[t];
                for (slot, b) in beta.iter().enumerate() {
                    v += b * pool[[t, pool_choice[ki][slot]]];
                }
                if sd_eps > 0.0 {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v += sd_eps * e;
                }
                raw[[t, col]] = v;
            }
            col += 1;
        }
        offset += dk;
    }

    let spec = BlockModelSpec {
        k,
        cluster_sizes,
        factor_counts,
        loadings,
        factor_cov,
        noise_var,
        common_loading,
        seed,
    };
    spec.validate()?;
    Ok((raw, spec))
}

fn sample_without_replacement(rng: &mut impl Rng, pool: usize, take: usize) -> Vec<usize> {
    debug_assert!(take <= pool);
    let mut idx: Vec<usize> = (0..pool).collect();
    // partial Fisher-Yates
    for i in 0..take {
        let j = rng.gen_range(i..pool);
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}


#[cfg(test)]
mod covariance_law_tests {
    use super::*;
    use crate::datamodel::population_covariance;

    // Law-of-large-numbers check at the reference scale d=500, K=25, n=250,
    // noise 0.1: the sample covariance of the unstandardized draw against
    // A Sigma_F A' + Gamma. A per-entry 4/sqrt(n) band is a ~3-sigma bound
    // for one entry but not for the max of 250k correlated entries (the
    // observed max sits near 0.3 for every seed), so the max gets a
    // 6/sqrt(n) band and 4/sqrt(n) applies to the 99.9th percentile.
    #[test]
    fn sample_covariance_approaches_population_covariance() {
        let cfg = BlockModelConfig::basic(500, 25, 250, 0.1);
        let (raw, spec) = generate_block_model_raw(&cfg, 99).unwrap();
        let sigma = population_covariance(&spec).unwrap();
        let n = cfg.n;
        let d = cfg.d;

        let mean: Vec<f64> = (0..d)
            .map(|j| raw.column(j).sum() / n as f64)
            .collect();
        let mut deviations: Vec<f64> = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in a..d {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += (raw[[t, a]] - mean[a]) * (raw[[t, b]] - mean[b]);
                }
                let s = acc / (n as f64 - 1.0);
                deviations.push((s - sigma.matrix()[[a, b]]).abs());
            }
        }
        deviations.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let band = 4.0 / (n as f64).sqrt();
        let p999 = deviations[(0.999 * (deviations.len() as f64 - 1.0)) as usize];
        let max = *deviations.last().unwrap();
        assert!(p999 <= band, "99.9th pct deviation {p999} exceeds {band}");
        assert!(max <= 1.5 * band, "max deviation {max} exceeds {}", 1.5 * band);
    }
}
