//! Core numeric types: standardized observation panels, cluster partitions,
//! covariance estimates, and the multi-factor block model used to make
//! synthetic data with known ground truth.

mod generator;
mod population;

pub use generator::{
    generate_block_model, BlockModelConfig, CommonLoadingLaw, FactorCountRule, NoiseLaw,
};
pub use population::{population_covariance, population_nodewise};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on column means of a standardized panel.
pub const MEAN_TOL: f64 = 1e-10;
/// Tolerance on column standard deviations of a standardized panel.
pub const STD_TOL: f64 = 1e-8;

/// An n x d observation matrix whose columns have zero mean and unit
/// sample standard deviation (divisor n-1).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    values: Array2<f64>,
    column_ids: Vec<String>,
}

impl StandardizedPanel {
    /// Wraps an already-standardized matrix, validating the invariants.
    pub fn from_standardized(values: Array2<f64>, column_ids: Vec<String>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 || d < 2 {
            return Err(Error::InvalidData(format!(
                "panel must be at least 2x2, got {n}x{d}"
            )));
        }
        if column_ids.len() != d {
            return Err(Error::InvalidData(format!(
                "{} column ids for {d} columns",
                column_ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("panel contains non-finite entries".into()));
        }
        for (j, col) in values.axis_iter(Axis(1)).enumerate() {
            let mean = col.mean().unwrap();
            if mean.abs() > MEAN_TOL {
                return Err(Error::InvalidData(format!(
                    "column {j} mean {mean:e} exceeds tolerance"
                )));
            }
            let sd = (col.mapv(|v| (v - mean) * (v - mean)).sum() / (n as f64 - 1.0)).sqrt();
            if (sd - 1.0).abs() > STD_TOL {
                return Err(Error::InvalidData(format!(
                    "column {j} standard deviation {sd} is not 1"
                )));
            }
        }
        Ok(Self { values, column_ids })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    /// Number of observations (rows).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables (columns).
    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

/// Centers and scales each column to zero mean and unit standard deviation
/// (divisor n-1). Column ids are generated as `x0..x{d-1}`.
pub fn standardize(raw: &Array2<f64>) -> Result<StandardizedPanel> {
    let ids = (0..raw.ncols()).map(|j| format!("x{j}")).collect();
    standardize_with_ids(raw, ids)
}

/// `standardize` with caller-provided column identifiers.
pub fn standardize_with_ids(raw: &Array2<f64>, column_ids: Vec<String>) -> Result<StandardizedPanel> {
    let (n, d) = raw.dim();
    if n < 2 || d < 2 {
        return Err(Error::InvalidData(format!(
            "panel must be at least 2x2, got {n}x{d}"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("input contains non-finite entries".into()));
    }
    let mut values = raw.clone();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.mean().unwrap();
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 || !var.is_finite() {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let sd = var.sqrt();
        col.mapv_inplace(|v| (v - mean) / sd);
    }
    StandardizedPanel::from_standardized(values, column_ids)
}

/// A hard cluster assignment of `d` items into clusters labeled `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Builds a partition; labels must lie in `1..=k`. A partition where some
    /// label never appears is accepted but reported by [`Partition::is_degenerate`].
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || assignment.is_empty() {
            return Err(Error::InvalidInput("empty partition".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&z| z == 0 || z > k) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(Self { assignment, k })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// True when one or more labels in `1..=k` never appear.
    pub fn is_degenerate(&self) -> bool {
        let mut seen = vec![false; self.k];
        for &z in &self.assignment {
            seen[z - 1] = true;
        }
        seen.iter().any(|s| !s)
    }

    /// Item indices of each cluster, by label.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &z) in self.assignment.iter().enumerate() {
            groups[z - 1].push(i);
        }
        groups
    }
}

/// Which estimator produced a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    Population,
    SampleSecondMoment,
}

/// A d x d symmetric covariance (or second-moment) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    matrix: Array2<f64>,
    kind: CovarianceKind,
}

impl CovarianceEstimate {
    pub fn new(matrix: Array2<f64>, kind: CovarianceKind) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::InvalidInput(format!("covariance must be square, got {r}x{c}")));
        }
        for i in 0..r {
            if matrix[[i, i]] < 0.0 {
                return Err(Error::InvalidInput(format!("negative diagonal at {i}")));
            }
            for j in (i + 1)..r {
                if (matrix[[i, j]] - matrix[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "asymmetric at ({i},{j}): {} vs {}",
                        matrix[[i, j]],
                        matrix[[j, i]]
                    )));
                }
            }
        }
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Sample second-moment matrix `(1/(n-1)) * sum_t x_t x_t'` of a panel.
pub fn sample_second_moment(panel: &StandardizedPanel) -> CovarianceEstimate {
    let x = panel.values();
    let n = panel.n() as f64;
    let mut gram = x.t().dot(x) / (n - 1.0);
    // symmetrize away rounding from the matmul
    for i in 0..gram.nrows() {
        for j in (i + 1)..gram.ncols() {
            let s = 0.5 * (gram[[i, j]] + gram[[j, i]]);
            gram[[i, j]] = s;
            gram[[j, i]] = s;
        }
    }
    CovarianceEstimate::new(gram, CovarianceKind::SampleSecondMoment)
        .expect("second moment is symmetric with nonnegative diagonal")
}

/// Generative parameters of the multi-factor block model: loadings `A`,
/// factor covariance, idiosyncratic variances, and the common-factor loading
/// per variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub k: usize,
    /// m_1..m_K, summing to d.
    pub cluster_sizes: Vec<usize>,
    /// d_1..d_K with 1 <= d_k <= m_k - 1.
    pub factor_counts: Vec<usize>,
    /// d x D loadings; row i is supported on its cluster's factor block.
    pub loadings: Array2<f64>,
    /// D x D factor covariance; within-cluster diagonal blocks are identity.
    pub factor_cov: Array2<f64>,
    /// Idiosyncratic variance per variable (the diagonal of Gamma).
    pub noise_var: Vec<f64>,
    /// Common (hidden global) factor loading per variable.
    pub common_loading: Vec<f64>,
    /// Seed the spec was generated with, for provenance.
    pub seed: u64,
}

impl BlockModelSpec {
    pub fn d(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn total_factors(&self) -> usize {
        self.factor_counts.iter().sum()
    }

    /// The partition implied by the contiguous cluster layout.
    pub fn partition(&self) -> Partition {
        let mut assignment = Vec::with_capacity(self.d());
        for (k, &m) in self.cluster_sizes.iter().enumerate() {
            assignment.extend(std::iter::repeat(k + 1).take(m));
        }
        Partition::new(assignment, self.k).expect("cluster sizes define a valid partition")
    }

    /// Checks the structural invariants: loading support matches the
    /// partition, within-cluster factor blocks are identity, noise variances
    /// are nonnegative, and each variable's loadings are normalized.
    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        let total = self.total_factors();
        if self.cluster_sizes.len() != self.k || self.factor_counts.len() != self.k {
            return Err(Error::InvalidSpec("cluster_sizes/factor_counts length".into()));
        }
        if self.loadings.dim() != (d, total) {
            return Err(Error::InvalidSpec(format!(
                "loadings must be {d}x{total}, got {:?}",
                self.loadings.dim()
            )));
        }
        if self.factor_cov.dim() != (total, total) {
            return Err(Error::InvalidSpec("factor_cov dimension".into()));
        }
        if self.noise_var.len() != d || self.common_loading.len() != d {
            return Err(Error::InvalidSpec("noise_var/common_loading length".into()));
        }
        for (k, (&m, &dk)) in self.cluster_sizes.iter().zip(&self.factor_counts).enumerate() {
            if dk == 0 || dk >= m {
                return Err(Error::InvalidSpec(format!(
                    "cluster {k}: factor count {dk} must satisfy 1 <= d_k <= m_k-1 = {}",
                    m.saturating_sub(1)
                )));
            }
        }
        if self.noise_var.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("negative noise variance".into()));
        }
        // factor block offsets per cluster
        let mut offsets = Vec::with_capacity(self.k + 1);
        let mut acc = 0;
        for &dk in &self.factor_counts {
            offsets.push(acc);
            acc += dk;
        }
        offsets.push(acc);
        // row support + normalization
        let mut row = 0usize;
        for (k, &m) in self.cluster_sizes.iter().enumerate() {
            let (lo, hi) = (offsets[k], offsets[k + 1]);
            for _ in 0..m {
                let mut norm2 = self.common_loading[row] * self.common_loading[row];
                for f in 0..total {
                    let a = self.loadings[[row, f]];
                    if (f < lo || f >= hi) && a != 0.0 {
                        return Err(Error::InvalidSpec(format!(
                            "row {row} loads on factor {f} outside its cluster block"
                        )));
                    }
                    norm2 += a * a;
                }
                if (norm2 - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "row {row}: loading normalization off by {:e}",
                        norm2 - 1.0
                    )));
                }
                row += 1;
            }
        }
        // within-cluster factor blocks are identity
        for k in 0..self.k {
            let (lo, hi) = (offsets[k], offsets[k + 1]);
            for a in lo..hi {
                for b in lo..hi {
                    let want = if a == b { 1.0 } else { 0.0 };
                    if (self.factor_cov[[a, b]] - want).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "factor_cov[{a},{b}] = {} in cluster {k} block",
                            self.factor_cov[[a, b]]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
