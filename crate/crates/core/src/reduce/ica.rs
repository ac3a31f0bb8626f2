use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::pca::PcaModel;
use crate::error::{Error, Result};
use crate::linalg::sign_of_largest;

/// FastICA (deflation, logcosh contrast) on PCA-whitened data.
#[derive(Debug, Clone)]
pub struct IcaModel {
    pub mean: Array1<f64>,
    /// d × k: centered data times this matrix is white.
    pub whitening: Array2<f64>,
    /// k × k with orthonormal rows; sources are `white · unmixingᵀ`.
    pub unmixing: Array2<f64>,
    pub iterations: Vec<usize>,
    pub(crate) sources: Array2<f64>,
}

impl IcaModel {
    pub(crate) fn fit(
        x: &Array2<f64>,
        k: usize,
        tolerance: f64,
        max_iter: usize,
        seed: u64,
    ) -> Result<Self> {
        let pca = PcaModel::fit(x, k)?;
        let top = pca.explained_variance[0];
        if let Some(i) = pca
            .explained_variance
            .iter()
            .position(|&v| !(v > super::EIGENVALUE_TOLERANCE * top))
        {
            return Err(Error::validation(format!(
                "ica: only {i} non-degenerate components available, {k} requested"
            )));
        }
        let mut whitening = pca.axes.clone();
        for (mut col, var) in whitening.axis_iter_mut(Axis(1)).zip(&pca.explained_variance) {
            col /= var.sqrt();
        }
        let white = (x - &pca.mean).dot(&whitening);
        let n = white.nrows() as f64;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unmixing = Array2::<f64>::zeros((k, k));
        let mut iterations = Vec::with_capacity(k);
        for p in 0..k {
            let mut w: Array1<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            orthonormalize(&mut w, &unmixing, p);
            let mut converged = None;
            for it in 1..=max_iter {
                let u = white.dot(&w);
                let g = u.mapv(f64::tanh);
                let g_prime_mean = g.iter().map(|t| 1.0 - t * t).sum::<f64>() / n;
                let mut next = white.t().dot(&g) / n - &w * g_prime_mean;
                orthonormalize(&mut next, &unmixing, p);
                let lim = (next.dot(&w).abs() - 1.0).abs();
                w = next;
                if lim < tolerance {
                    converged = Some(it);
                    break;
                }
            }
            let Some(it) = converged else {
                return Err(Error::NoConvergence {
                    what: format!("FastICA component {p}"),
                    iterations: max_iter,
                });
            };
            w *= sign_of_largest(w.as_slice().expect("contiguous"));
            unmixing.row_mut(p).assign(&w);
            iterations.push(it);
        }
        let sources = white.dot(&unmixing.t());
        Ok(IcaModel {
            mean: pca.mean,
            whitening,
            unmixing,
            iterations,
            sources,
        })
    }

    pub(crate) fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean).dot(&self.whitening).dot(&self.unmixing.t())
    }
}

/// Gram–Schmidt against the first `p` rows of `basis`, then normalize.
fn orthonormalize(w: &mut Array1<f64>, basis: &Array2<f64>, p: usize) {
    for j in 0..p {
        let b = basis.row(j);
        let proj = w.dot(&b);
        w.scaled_add(-proj, &b);
    }
    let norm = w.dot(w).sqrt();
    if norm > 0.0 {
        *w /= norm;
    }
}
