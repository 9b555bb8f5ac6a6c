//! Agglomerative average-linkage clustering on a dissimilarity matrix, cut
//! at a fixed cluster count. This is the cluster-construction stand-in for
//! the correlation-dissimilarity baseline: the dissimilarity is specified,
//! the merge rule is average linkage over it.

use ndarray::Array2;

use super::DissimilarityMatrix;
use crate::datamodel::Partition;
use crate::error::{Error, Result};

/// Merges the closest pair (average linkage, Lance-Williams update) until
/// `k` clusters remain. Ties break toward the smallest indices, so the
/// procedure is deterministic.
pub fn acc_cluster(dissimilarity: &DissimilarityMatrix, k: usize) -> Result<Partition> {
    let d = dissimilarity.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, d });
    }
    let mut dist: Array2<f64> = dissimilarity.values().clone();
    let mut active: Vec<bool> = vec![true; d];
    let mut sizes: Vec<usize> = vec![1; d];
    let mut members: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
    let mut remaining = d;

    while remaining > k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..d {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..d {
                if !active[j] {
                    continue;
                }
                let v = dist[[i, j]];
                if best.map(|(_, _, bv)| v < bv).unwrap_or(true) {
                    best = Some((i, j, v));
                }
            }
        }
        let (a, b, _) = best.expect("more than k active clusters");
        // merge b into a; average-linkage distance to any other cluster is
        // the size-weighted mean of the two parents' distances
        for l in 0..d {
            if !active[l] || l == a || l == b {
                continue;
            }
            let va = dist[[a, l]];
            let vb = dist[[b, l]];
            let merged =
                (sizes[a] as f64 * va + sizes[b] as f64 * vb) / (sizes[a] + sizes[b]) as f64;
            dist[[a, l]] = merged;
            dist[[l, a]] = merged;
        }
        sizes[a] += sizes[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        active[b] = false;
        remaining -= 1;
    }

    let mut assignment = vec![0usize; d];
    let mut label = 0usize;
    for i in 0..d {
        if active[i] {
            label += 1;
            for &item in &members[i] {
                assignment[item] = label;
            }
        }
    }
    Partition::new(assignment, k)
}
