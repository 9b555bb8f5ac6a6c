//! Spectral clustering on the symmetric normalized Laplacian
//! `L = I - D^{-1/2} C D^{-1/2}` with row-normalized eigenvector embedding
//! and k-means++ (the Ng-Jordan-Weiss variant).

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use super::SimilarityMatrix;
use crate::datamodel::Partition;
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::seeding::{derive_seed, rng_from_seed};

/// Uniform similarity injected on all-zero rows so the degree matrix stays
/// invertible (heavy shrinkage can isolate a node completely).
const ISOLATED_NODE_FLOOR: f64 = 1e-12;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

/// Clusters the similarity graph into `k` groups. Deterministic in
/// `(c, k, seed)`; k-means restarts run in parallel with per-restart seeds.
pub fn spectral_cluster(c: &SimilarityMatrix, k: usize, seed: u64) -> Result<Partition> {
    let d = c.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, d });
    }
    if k == 1 {
        return Partition::new(vec![1; d], 1);
    }

    let mut w = c.values().clone();
    for i in 0..d {
        if w.row(i).sum() <= 0.0 {
            for j in 0..d {
                if j != i {
                    w[[i, j]] = ISOLATED_NODE_FLOOR;
                    w[[j, i]] = ISOLATED_NODE_FLOOR;
                }
            }
        }
    }

    let degree: Array1<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    let inv_sqrt = degree.mapv(|v| 1.0 / v.sqrt());
    let mut lap = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let norm = -w[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
            lap[[i, j]] = if i == j { 1.0 + norm } else { norm };
        }
    }
    // exact symmetry for the eigensolver
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (lap[[i, j]] + lap[[j, i]]);
            lap[[i, j]] = s;
            lap[[j, i]] = s;
        }
    }

    let (_, vecs) = eigh(&lap)?;
    // bottom-k eigenvectors, rows normalized to the unit sphere
    let mut embed = Array2::<f64>::zeros((d, k));
    for i in 0..d {
        for j in 0..k {
            embed[[i, j]] = vecs[[i, j]];
        }
        let norm = embed.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            embed.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }

    let best = (0..KMEANS_RESTARTS)
        .into_par_iter()
        .map(|restart| kmeans(&embed, k, derive_seed(seed, restart as u64)))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one restart");

    let assignment = best.1.iter().map(|&z| z + 1).collect();
    Partition::new(assignment, k)
}

/// Standard k-means with k-means++ seeding; returns (inertia, labels).
fn kmeans(points: &Array2<f64>, k: usize, seed: u64) -> (f64, Vec<usize>) {
    let (n, dim) = points.dim();
    let mut rng = rng_from_seed(seed);

    // k-means++ seeding
    let mut centers = Array2::<f64>::zeros((k, dim));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut dist_sq = vec![0.0f64; n];
    for i in 0..n {
        dist_sq[i] = sq_dist(points, i, &centers, 0);
    }
    for c in 1..k {
        let total: f64 = dist_sq.iter().sum();
        let chosen = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &ds) in dist_sq.iter().enumerate() {
                if target < ds {
                    pick = i;
                    break;
                }
                target -= ds;
            }
            pick
        };
        centers.row_mut(c).assign(&points.row(chosen));
        for i in 0..n {
            dist_sq[i] = dist_sq[i].min(sq_dist(points, i, &centers, c));
        }
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITER {
        // assignment step
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut best = (0usize, f64::INFINITY);
            for c in 0..k {
                let dist = sq_dist(points, i, &centers, c);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            labels[i] = best.0;
            new_inertia += best.1;
        }
        // update step
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, dim));
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty centroid at the point farthest from its
                // current center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points, a, &centers, labels[a]);
                        let db = sq_dist(points, b, &centers, labels[b]);
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap();
                centers.row_mut(c).assign(&points.row(far));
            } else {
                let inv = 1.0 / counts[c] as f64;
                for j in 0..dim {
                    centers[[c, j]] = sums[[c, j]] * inv;
                }
            }
        }
        if (inertia - new_inertia).abs() <= 1e-12 * inertia.max(1.0) {
            inertia = new_inertia;
            break;
        }
        inertia = new_inertia;
    }
    (inertia, labels)
}

fn sq_dist(points: &Array2<f64>, i: usize, centers: &Array2<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centers.row(c).iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ami;
    use ndarray::Array2;

    fn two_block_similarity(sizes: (usize, usize)) -> SimilarityMatrix {
        let d = sizes.0 + sizes.1;
        let mut c = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                if i != j && (i < sizes.0) == (j < sizes.0) {
                    c[[i, j]] = 1.0;
                }
            }
        }
        SimilarityMatrix::new(c).unwrap()
    }

    #[test]
    fn exact_blocks_are_recovered() {
        let c = two_block_similarity((4, 5));
        let p = spectral_cluster(&c, 2, 0).unwrap();
        let truth = Partition::new(
            (0..9).map(|i| if i < 4 { 1 } else { 2 }).collect(),
            2,
        )
        .unwrap();
        assert_eq!(ami(&p, &truth).unwrap(), 1.0);
    }

    #[test]
    fn k_equal_one_is_all_in_one() {
        let c = two_block_similarity((3, 3));
        let p = spectral_cluster(&c, 1, 0).unwrap();
        assert!(p.assignment().iter().all(|&z| z == 1));
    }

    #[test]
    fn k_larger_than_d_is_rejected() {
        let c = two_block_similarity((2, 2));
        assert!(matches!(
            spectral_cluster(&c, 5, 0),
            Err(Error::InvalidK { k: 5, d: 4 })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let c = two_block_similarity((5, 4));
        let a = spectral_cluster(&c, 3, 42).unwrap();
        let b = spectral_cluster(&c, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_equivariant_up_to_relabeling() {
        // permuting rows/columns of C permutes the partition identically
        use rand::seq::SliceRandom;
        let mut rng = crate::seeding::rng_from_seed(9);
        use rand_distr::{Distribution, StandardNormal};
        let d = 12;
        let mut base = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in (i + 1)..d {
                let v: f64 = StandardNormal.sample(&mut rng);
                let block_bonus = if (i < 6) == (j < 6) { 2.0 } else { 0.0 };
                let w = (v * 0.05 + block_bonus).abs();
                base[[i, j]] = w;
                base[[j, i]] = w;
            }
        }
        let c = SimilarityMatrix::new(base.clone()).unwrap();
        let p = spectral_cluster(&c, 2, 7).unwrap();

        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let mut permuted = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                permuted[[i, j]] = base[[perm[i], perm[j]]];
            }
        }
        let cp = SimilarityMatrix::new(permuted).unwrap();
        let pp = spectral_cluster(&cp, 2, 7).unwrap();

        let pulled: Vec<usize> = (0..d).map(|i| pp.assignment()[i]).collect();
        let expected: Vec<usize> = (0..d).map(|i| p.assignment()[perm[i]]).collect();
        let a = Partition::new(pulled, 2).unwrap();
        let b = Partition::new(expected, 2).unwrap();
        assert_eq!(ami(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn isolated_node_does_not_break_the_laplacian() {
        let mut c = Array2::<f64>::zeros((5, 5));
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    c[[i, j]] = 1.0;
                }
            }
        }
        // node 4 has zero similarity everywhere
        let sim = SimilarityMatrix::new(c).unwrap();
        let p = spectral_cluster(&sim, 2, 1).unwrap();
        assert_eq!(p.len(), 5);
    }
}
