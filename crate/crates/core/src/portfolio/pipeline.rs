//! The hierarchical clustering used on return windows (robust regression at
//! the top level, correlation-profile linkage below it) and the
//! lowest-volatility representative selection.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::baselines::{acc_cluster, cord_dissimilarity};
use crate::cluster::{spectral_cluster, symmetrize};
use crate::datamodel::{standardize, Partition, StandardizedPanel};
use crate::delta::{select_delta, DeltaConfig};
use crate::dro::{admm_fit, SolverOptions};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Options for the two-level clustering.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchicalOptions {
    pub solver: SolverOptions,
    pub delta: DeltaConfig,
}

/// Two-level clustering of a return window: the robust nodewise regression
/// with spectral clustering carves out `k1` top-level groups, then each
/// group splits into `k2` sub-clusters by correlation-profile linkage.
/// Groups with at most `k2` members become singletons. The result is a flat
/// partition with at most `k1 * k2` labels.
pub fn hierarchical_cluster(
    window: ArrayView2<'_, f64>,
    k1: usize,
    k2: usize,
    opts: &HierarchicalOptions,
    seed: u64,
) -> Result<Partition> {
    let d = window.ncols();
    if k1 == 0 || k2 == 0 || k1 * k2 > d {
        return Err(Error::InvalidK { k: k1 * k2, d });
    }
    let panel = standardize(&window.to_owned())?;
    let top = if k1 == 1 {
        Partition::new(vec![1; d], 1)?
    } else {
        let delta = select_delta(&panel, &opts.delta, derive_seed(seed, 0))?;
        let (coef, _) = admm_fit(&panel, delta.delta, &opts.solver)?;
        let similarity = symmetrize(&coef);
        spectral_cluster(&similarity, k1, derive_seed(seed, 1))?
    };
    split_within(&panel, &top, k2)
}

/// Splits each top-level cluster into `k2` sub-clusters; the flat labels
/// enumerate (top cluster, sub cluster) pairs in order.
fn split_within(panel: &StandardizedPanel, top: &Partition, k2: usize) -> Result<Partition> {
    let d = panel.d();
    let mut assignment = vec![0usize; d];
    let mut next_label = 0usize;
    for members in top.clusters() {
        if members.is_empty() {
            continue;
        }
        if k2 == 1 {
            next_label += 1;
            for &i in &members {
                assignment[i] = next_label;
            }
            continue;
        }
        if members.len() <= k2 {
            // too small to split: singletons per member
            for &i in &members {
                next_label += 1;
                assignment[i] = next_label;
            }
            continue;
        }
        let sub = column_subset(panel, &members)?;
        let cord = cord_dissimilarity(&sub)?;
        let sub_partition = acc_cluster(&cord, k2)?;
        let base = next_label;
        for (slot, &i) in members.iter().enumerate() {
            assignment[i] = base + sub_partition.assignment()[slot];
        }
        next_label += sub_partition.k();
    }
    Partition::new(assignment, next_label)
}

fn column_subset(panel: &StandardizedPanel, cols: &[usize]) -> Result<StandardizedPanel> {
    let x = panel.values();
    let mut sub = ndarray::Array2::<f64>::zeros((panel.n(), cols.len()));
    let mut ids = Vec::with_capacity(cols.len());
    for (cj, &j) in cols.iter().enumerate() {
        sub.column_mut(cj).assign(&x.column(j));
        ids.push(panel.column_ids()[j].clone());
    }
    StandardizedPanel::from_standardized(sub, ids)
}

/// One representative per cluster: the member with the smallest sample
/// variance of daily returns over the window; ties break to the
/// lexicographically first ticker. Empty clusters are skipped.
pub fn select_low_vol(
    window: ArrayView2<'_, f64>,
    tickers: &[String],
    partition: &Partition,
) -> Result<Vec<usize>> {
    if partition.len() != window.ncols() || tickers.len() != window.ncols() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} items, window has {} columns, {} tickers",
            partition.len(),
            window.ncols(),
            tickers.len()
        )));
    }
    let n = window.nrows() as f64;
    let variance = |j: usize| -> f64 {
        let col = window.column(j);
        let mean = col.sum() / n;
        col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    let mut picks = Vec::new();
    for members in partition.clusters() {
        if members.is_empty() {
            continue;
        }
        let best = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                variance(a)
                    .partial_cmp(&variance(b))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| tickers[a].cmp(&tickers[b]))
            })
            .unwrap();
        picks.push(best);
    }
    Ok(picks)
}
