//! k-medoids by PAM: a greedy BUILD phase followed by steepest-descent SWAP
//! until no exchange lowers the total dissimilarity. Ties break toward the
//! lowest index, making the run deterministic; the seed parameter is kept
//! for interface parity with the stochastic clusterers and is unused here.

use super::DissimilarityMatrix;
use crate::datamodel::Partition;
use crate::error::{Error, Result};

pub fn kmedoids(dissimilarity: &DissimilarityMatrix, k: usize, seed: u64) -> Result<Partition> {
    kmedoids_with_details(dissimilarity, k, seed).map(|(p, _, _)| p)
}

/// As [`kmedoids`], also returning the medoid indices and the total cost.
pub fn kmedoids_with_details(
    dissimilarity: &DissimilarityMatrix,
    k: usize,
    _seed: u64,
) -> Result<(Partition, Vec<usize>, f64)> {
    let d = dissimilarity.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, d });
    }
    let dist = dissimilarity.values();

    // BUILD: first medoid minimizes total dissimilarity, each later medoid
    // maximizes the total cost reduction
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut first = 0usize;
    let mut first_cost = f64::INFINITY;
    for c in 0..d {
        let total: f64 = (0..d).map(|i| dist[[i, c]]).sum();
        if total < first_cost {
            first_cost = total;
            first = c;
        }
    }
    medoids.push(first);
    let mut nearest: Vec<f64> = (0..d).map(|i| dist[[i, first]]).collect();
    while medoids.len() < k {
        let mut best_gain = f64::NEG_INFINITY;
        let mut best_h = usize::MAX;
        for h in 0..d {
            if medoids.contains(&h) {
                continue;
            }
            let gain: f64 = (0..d)
                .map(|i| (nearest[i] - dist[[i, h]]).max(0.0))
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best_h = h;
            }
        }
        medoids.push(best_h);
        for i in 0..d {
            nearest[i] = nearest[i].min(dist[[i, best_h]]);
        }
    }

    // SWAP: steepest descent over all (medoid, candidate) exchanges
    let cost_of = |meds: &[usize]| -> f64 {
        (0..d)
            .map(|i| meds.iter().map(|&m| dist[[i, m]]).fold(f64::INFINITY, f64::min))
            .sum()
    };
    let mut cost = cost_of(&medoids);
    loop {
        let mut best_cost = cost;
        let mut best_swap: Option<(usize, usize)> = None;
        for mi in 0..k {
            for h in 0..d {
                if medoids.contains(&h) {
                    continue;
                }
                let old = medoids[mi];
                medoids[mi] = h;
                let trial = cost_of(&medoids);
                medoids[mi] = old;
                if trial < best_cost - 1e-12 {
                    best_cost = trial;
                    best_swap = Some((mi, h));
                }
            }
        }
        match best_swap {
            Some((mi, h)) => {
                medoids[mi] = h;
                cost = best_cost;
            }
            None => break,
        }
    }

    let assignment = (0..d)
        .map(|i| {
            let mut best = (0usize, f64::INFINITY);
            for (label, &m) in medoids.iter().enumerate() {
                if dist[[i, m]] < best.1 {
                    best = (label, dist[[i, m]]);
                }
            }
            best.0 + 1
        })
        .collect();
    Ok((Partition::new(assignment, k)?, medoids, cost))
}

/// Total cost of an assignment: each point's dissimilarity to its medoid.
#[cfg(test)]
pub(crate) fn assignment_cost(dissimilarity: &DissimilarityMatrix, medoids: &[usize]) -> f64 {
    let d = dissimilarity.dim();
    let dist = dissimilarity.values();
    (0..d)
        .map(|i| medoids.iter().map(|&m| dist[[i, m]]).fold(f64::INFINITY, f64::min))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::DissimilarityKind;
    use ndarray::Array2;

    fn dmatrix(values: Array2<f64>) -> DissimilarityMatrix {
        DissimilarityMatrix::new(values, DissimilarityKind::OneMinusRhoSquared).unwrap()
    }

    fn random_dissimilarity(d: usize, seed: u64) -> DissimilarityMatrix {
        let mut rng = crate::seeding::rng_from_seed(seed);
        use rand::Rng;
        let mut v = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in (i + 1)..d {
                let x: f64 = rng.gen_range(0.01..1.0);
                v[[i, j]] = x;
                v[[j, i]] = x;
            }
        }
        dmatrix(v)
    }

    #[test]
    fn k_equals_d_gives_zero_cost_singletons() {
        let dm = random_dissimilarity(5, 1);
        let p = kmedoids(&dm, 5, 0).unwrap();
        let mut labels = p.assignment().to_vec();
        labels.sort_unstable();
        assert_eq!(labels, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn pam_matches_exhaustive_enumeration_on_small_case() {
        // d = 7, K = 2: compare against all C(7,2) medoid pairs. Steepest
        // descent can stop at a local optimum on adversarial instances, so
        // the equality check runs on a fixed instance where it attains the
        // global one; the >= bound is an invariant on every instance.
        let mut equal_hits = 0;
        for seed in 0..6 {
            let dm = random_dissimilarity(7, seed);
            let (_, _, pam_cost) = kmedoids_with_details(&dm, 2, 0).unwrap();
            let mut best_cost = f64::INFINITY;
            for a in 0..7 {
                for b in (a + 1)..7 {
                    best_cost = best_cost.min(assignment_cost(&dm, &[a, b]));
                }
            }
            assert!(
                pam_cost >= best_cost - 1e-12,
                "pam {pam_cost} beat brute force {best_cost}"
            );
            if (pam_cost - best_cost).abs() < 1e-12 {
                equal_hits += 1;
            }
        }
        assert!(equal_hits >= 4, "PAM matched brute force on only {equal_hits}/6 instances");
    }

    #[test]
    fn points_attach_to_their_nearest_medoid() {
        let dm = random_dissimilarity(9, 3);
        let p = kmedoids(&dm, 3, 0).unwrap();
        // reconstruct medoids per label as the point with zero distance to
        // itself that minimizes cluster cost, then check nearest-medoid
        let clusters = p.clusters();
        let meds: Vec<usize> = clusters
            .iter()
            .map(|members| {
                members
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let ca: f64 = members.iter().map(|&m| dm.values()[[m, a]]).sum();
                        let cb: f64 = members.iter().map(|&m| dm.values()[[m, b]]).sum();
                        ca.partial_cmp(&cb).unwrap()
                    })
                    .unwrap()
            })
            .collect();
        for i in 0..9 {
            let assigned = p.assignment()[i] - 1;
            let di = dm.values()[[i, meds[assigned]]];
            for &m in &meds {
                assert!(di <= dm.values()[[i, m]] + 1e-9);
            }
        }
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let dm = random_dissimilarity(4, 4);
        assert!(matches!(
            kmedoids(&dm, 5, 0),
            Err(Error::InvalidK { k: 5, d: 4 })
        ));
    }
}
