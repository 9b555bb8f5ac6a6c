//! From regression coefficients to clusters: symmetrized similarity graphs,
//! spectral clustering, and adjusted-mutual-information scoring.

mod ami;
mod spectral;

pub use ami::ami;
pub use spectral::spectral_cluster;

use ndarray::Array2;

use crate::dro::CoefficientMatrix;
use crate::error::{Error, Result};

/// A d x d symmetric nonnegative similarity graph with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::InvalidInput(format!("similarity must be square, got {r}x{c}")));
        }
        for i in 0..r {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..r {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) = {v}")));
                }
                if (v - values[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// A copy with the diagonal filled to 2.0, the heatmap-export convention.
    pub fn plot_matrix(&self) -> Array2<f64> {
        let mut m = self.values.clone();
        for i in 0..m.nrows() {
            m[[i, i]] = 2.0;
        }
        m
    }
}

/// `C_ij = |b_ij| + |b_ji|`.
pub fn symmetrize(b: &CoefficientMatrix) -> SimilarityMatrix {
    let d = b.dim();
    let v = b.values();
    let mut c = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            if i != j {
                c[[i, j]] = v[[i, j]].abs() + v[[j, i]].abs();
            }
        }
    }
    SimilarityMatrix::new(c).expect("symmetrized matrix satisfies the invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_coefficients_give_zero_similarity() {
        let b = CoefficientMatrix::zeros(3);
        let c = symmetrize(&b);
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn absolute_values_add() {
        let b = CoefficientMatrix::new(array![[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let c = symmetrize(&b);
        assert_eq!(c.values()[[0, 1]], 2.0);
        assert_eq!(c.values()[[1, 0]], 2.0);
    }

    #[test]
    fn symmetrize_is_transpose_invariant() {
        let mut rng = crate::seeding::rng_from_seed(3);
        use rand_distr::{Distribution, StandardNormal};
        let m = Array2::from_shape_fn((6, 6), |_| -> f64 { StandardNormal.sample(&mut rng) });
        let b = CoefficientMatrix::from_dense(m.clone()).unwrap();
        let bt = CoefficientMatrix::from_dense(m.t().to_owned()).unwrap();
        assert_eq!(symmetrize(&b), symmetrize(&bt));
    }

    #[test]
    fn plot_matrix_fills_diagonal_with_two() {
        let b = CoefficientMatrix::new(array![[0.0, 0.5], [0.25, 0.0]]).unwrap();
        let c = symmetrize(&b);
        let p = c.plot_matrix();
        assert_eq!(p[[0, 0]], 2.0);
        assert_eq!(p[[1, 1]], 2.0);
        assert_eq!(p[[0, 1]], 0.75);
    }
}
