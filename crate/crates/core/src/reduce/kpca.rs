use ndarray::{Array1, Array2, Axis};

use super::kernel::{center_kernel, center_test_kernel, gram, gram_symmetric, KernelSpec};
use crate::error::Result;
use crate::linalg::symmetric_eigen;

/// Kernel PCA on the double-centered Gram matrix.
#[derive(Debug, Clone)]
pub struct KpcaModel {
    pub kernel: KernelSpec,
    pub requested_components: usize,
    /// Eigenvalues of the centered Gram matrix for the kept components.
    pub eigenvalues: Vec<f64>,
    pub(crate) train: Array2<f64>,
    /// Eigenvectors scaled by `1 / sqrt(eigenvalue)`, n × k.
    pub(crate) alphas: Array2<f64>,
    train_col_means: Array1<f64>,
    train_grand_mean: f64,
    pub(crate) embedding: Array2<f64>,
}

impl KpcaModel {
    pub(crate) fn fit(x: &Array2<f64>, k: usize, kernel: KernelSpec) -> Result<Self> {
        let n = x.nrows();
        let km = gram_symmetric(&kernel, x);
        let train_col_means = km.mean_axis(Axis(0)).expect("n >= 2");
        let train_grand_mean = train_col_means.mean().expect("n >= 2");
        let centered = center_kernel(&km)?;
        let eig = symmetric_eigen(&centered)?;
        let kept = super::leading_positive(&eig.values, k);

        let mut alphas = Array2::zeros((n, kept));
        let mut embedding = Array2::zeros((n, kept));
        for i in 0..kept {
            let root = eig.values[i].sqrt();
            let v = eig.vectors.column(i);
            alphas.column_mut(i).assign(&(&v / root));
            embedding.column_mut(i).assign(&(&v * root));
        }
        Ok(KpcaModel {
            kernel,
            requested_components: k,
            eigenvalues: eig.values[..kept].to_vec(),
            train: x.clone(),
            alphas,
            train_col_means,
            train_grand_mean,
            embedding,
        })
    }

    pub(crate) fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let k_test = gram(&self.kernel, x, &self.train);
        center_test_kernel(&k_test, &self.train_col_means, self.train_grand_mean).dot(&self.alphas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transform_reproduces_training_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((25, 4), |_| rng.random_range(0.0..3.0));
        let m = KpcaModel::fit(&x, 5, KernelSpec::rbf(0.4).unwrap()).unwrap();
        let t = m.transform(&x);
        assert!((&t - &m.embedding).iter().all(|v| v.abs() < 1e-8));
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_deficient_linear_kernel_shrinks_k() {
        // Three distinct points span a 2-d affine set: at most 2 components survive centering.
        let x = ndarray::array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let m = KpcaModel::fit(&x, 4, KernelSpec::Linear).unwrap();
        assert_eq!(m.requested_components, 4);
        assert_eq!(m.alphas.ncols(), 2);
    }
}
