//! Adjusted mutual information under the permutation (hypergeometric) model:
//! `AMI = (MI - E[MI]) / (mean(H(p), H(q)) - E[MI])`.
//!
//! The expected mutual information sums, for every cluster pair (a_i, b_j),
//! over all feasible contingency counts, weighting each count's contribution
//! by its hypergeometric probability.

use statrs::function::gamma::ln_gamma;

use crate::datamodel::Partition;
use crate::error::{Error, Result};

/// AMI between two partitions of the same items. 1 for identical partitions
/// up to relabeling; near 0 for independent labelings. When both partitions
/// are trivial (denominator zero), defined as 1 if they are equal and 0
/// otherwise.
pub fn ami(p: &Partition, q: &Partition) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "partition lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let n = p.len();
    let (kp, kq) = (p.k(), q.k());
    let mut contingency = vec![vec![0usize; kq]; kp];
    for (zp, zq) in p.assignment().iter().zip(q.assignment()) {
        contingency[zp - 1][zq - 1] += 1;
    }
    let a: Vec<usize> = contingency.iter().map(|row| row.iter().sum()).collect();
    let b: Vec<usize> = (0..kq).map(|j| contingency.iter().map(|row| row[j]).sum()).collect();

    let nf = n as f64;
    let mi = {
        let mut acc = 0.0;
        for i in 0..kp {
            for j in 0..kq {
                let nij = contingency[i][j] as f64;
                if nij > 0.0 {
                    acc += (nij / nf) * ((nf * nij) / (a[i] as f64 * b[j] as f64)).ln();
                }
            }
        }
        acc
    };
    let h = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let (hp, hq) = (h(&a), h(&b));
    let emi = expected_mi(&a, &b, n);

    let denom = 0.5 * (hp + hq) - emi;
    if denom.abs() < 1e-15 {
        // both partitions trivial (single cluster or all singletons with
        // matching margins); equality decides
        let equal = mi - emi;
        return Ok(if equal.abs() < 1e-15 && hp == hq { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

/// Expected MI over the permutation model, via log-gamma factorials.
fn expected_mi(a: &[usize], b: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    let log_fact = |x: usize| ln_gamma(x as f64 + 1.0);
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nij_f = nij as f64;
                let term = (nij_f / nf) * ((nf * nij_f) / (ai as f64 * bj as f64)).ln();
                let log_prob = log_fact(ai) + log_fact(bj) + log_fact(n - ai) + log_fact(n - bj)
                    - log_fact(n)
                    - log_fact(nij)
                    - log_fact(ai - nij)
                    - log_fact(bj - nij)
                    - log_fact(n + nij - ai - bj);
                emi += term * log_prob.exp();
            }
        }
    }
    emi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn part(labels: &[usize], k: usize) -> Partition {
        Partition::new(labels.to_vec(), k).unwrap()
    }

    /// Independent oracle: expected MI with probabilities formed from exact
    /// f64 factorial products (fine for n <= 20).
    fn emi_oracle(a: &[usize], b: &[usize], n: usize) -> f64 {
        fn fact(x: usize) -> f64 {
            (1..=x).map(|v| v as f64).product()
        }
        let nf = n as f64;
        let mut emi = 0.0;
        for &ai in a {
            for &bj in b {
                let lo = 1.max((ai + bj).saturating_sub(n));
                let hi = ai.min(bj);
                for nij in lo..=hi {
                    let term = (nij as f64 / nf) * ((nf * nij as f64) / (ai as f64 * bj as f64)).ln();
                    let prob = fact(ai) * fact(bj) * fact(n - ai) * fact(n - bj)
                        / (fact(n)
                            * fact(nij)
                            * fact(ai - nij)
                            * fact(bj - nij)
                            * fact(n + nij - ai - bj));
                    emi += term * prob;
                }
            }
        }
        emi
    }

    #[test]
    fn identical_partitions_score_one() {
        let p = part(&[1, 1, 2, 2, 3, 3], 3);
        assert_relative_eq!(ami(&p, &p).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_scores_one() {
        let p = part(&[1, 1, 2, 2], 2);
        let q = part(&[2, 2, 1, 1], 2);
        assert_relative_eq!(ami(&p, &q).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn six_item_case_matches_direct_formula() {
        let p = part(&[1, 1, 2, 2, 3, 3], 3);
        let q = part(&[1, 2, 1, 2, 3, 3], 3);
        let got = ami(&p, &q).unwrap();

        // recompute through the oracle path
        let a = [2usize, 2, 2];
        let b = [2usize, 2, 2];
        let emi = emi_oracle(&a, &b, 6);
        let nf = 6.0f64;
        // contingency: [[1,1,0],[1,1,0],[0,0,2]]
        let mi = 2.0 * (1.0 / nf) * ((nf * 1.0) / 4.0).ln() * 2.0
            + (2.0 / nf) * ((nf * 2.0) / 4.0).ln();
        let h = -3.0 * (2.0 / nf) * (2.0f64 / nf).ln();
        let want = (mi - emi) / (h - emi);
        assert_relative_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn emi_implementations_agree() {
        let mut rng = crate::seeding::rng_from_seed(5);
        for _ in 0..50 {
            let n = rng.gen_range(4..=12);
            let kp = rng.gen_range(1..=3usize);
            let kq = rng.gen_range(1..=3usize);
            let pa: Vec<usize> = (0..n)
                .map(|i| if i < kp { i + 1 } else { rng.gen_range(1..=kp) })
                .collect();
            let qa: Vec<usize> = (0..n)
                .map(|i| if i < kq { i + 1 } else { rng.gen_range(1..=kq) })
                .collect();
            let p = part(&pa, kp);
            let q = part(&qa, kq);
            let mut a = vec![0usize; kp];
            let mut b = vec![0usize; kq];
            for &z in p.assignment() {
                a[z - 1] += 1;
            }
            for &z in q.assignment() {
                b[z - 1] += 1;
            }
            assert_relative_eq!(
                expected_mi(&a, &b, n),
                emi_oracle(&a, &b, n),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn ami_is_symmetric_and_bounded() {
        let p = part(&[1, 1, 2, 3, 3, 3, 2, 1], 3);
        let q = part(&[1, 2, 2, 3, 3, 1, 1, 2], 3);
        let pq = ami(&p, &q).unwrap();
        let qp = ami(&q, &p).unwrap();
        assert_relative_eq!(pq, qp, epsilon = 1e-12);
        assert!(pq <= 1.0);
    }

    #[test]
    fn random_shuffles_average_near_zero() {
        use rand::seq::SliceRandom;
        let p = part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4], 4);
        let mut rng = crate::seeding::rng_from_seed(11);
        let mut total = 0.0;
        let shuffles = 200;
        for _ in 0..shuffles {
            let mut labels = p.assignment().to_vec();
            labels.shuffle(&mut rng);
            let q = part(&labels, 4);
            total += ami(&p, &q).unwrap();
        }
        let mean = total / shuffles as f64;
        assert!(mean.abs() < 0.1, "mean shuffled AMI {mean}");
    }

    #[test]
    fn trivial_partitions_follow_the_convention() {
        let one = part(&[1, 1, 1, 1], 1);
        assert_eq!(ami(&one, &one).unwrap(), 1.0);
        let mismatched = part(&[1, 1, 2, 2], 2);
        let got = ami(&one, &mismatched).unwrap();
        assert!(got.abs() < 1e-12, "one-vs-structured AMI {got}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let p = part(&[1, 2], 2);
        let q = part(&[1, 2, 1], 2);
        assert!(ami(&p, &q).is_err());
    }
}
