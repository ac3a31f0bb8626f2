use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, sign_of_largest, symmetric_eigen};

/// Principal axes of the (1/N) sample covariance.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// d × k, one unit axis per column.
    pub axes: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub(crate) scores: Array2<f64>,
}

impl PcaModel {
    pub(crate) fn fit(x: &Array2<f64>, k: usize) -> Result<Self> {
        let (n, d) = x.dim();
        let (mean, xc) = center_columns(x);
        let (axes, variance) = if d <= n {
            covariance_axes(&xc, k)?
        } else {
            match gram_axes(&xc, k)? {
                Some(found) => found,
                // Rank-deficient beyond k: only the d×d route can supply
                // zero-variance axes.
                None => covariance_axes(&xc, k)?,
            }
        };
        let scores = xc.dot(&axes);
        Ok(PcaModel {
            mean,
            axes,
            explained_variance: variance,
            scores,
        })
    }

    pub(crate) fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean).dot(&self.axes)
    }
}

fn covariance_axes(xc: &Array2<f64>, k: usize) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = xc.nrows() as f64;
    let cov = xc.t().dot(xc) / n;
    let eig = symmetric_eigen(&cov)?;
    let axes = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    Ok((axes, eig.values[..k].iter().map(|v| v.max(0.0)).collect()))
}

/// Axes through the n × n Gram matrix when features outnumber samples.
/// Returns `None` if any of the leading `k` Gram eigenvalues vanishes.
fn gram_axes(xc: &Array2<f64>, k: usize) -> Result<Option<(Array2<f64>, Vec<f64>)>> {
    let n = xc.nrows();
    let g = xc.dot(&xc.t());
    let eig = symmetric_eigen(&g)?;
    if super::leading_positive(&eig.values, k) < k {
        return Ok(None);
    }
    let mut axes = Array2::zeros((xc.ncols(), k));
    for i in 0..k {
        let u = eig.vectors.column(i);
        let mut axis = xc.t().dot(&u) / eig.values[i].sqrt();
        let norm = axis.dot(&axis).sqrt();
        if !(norm > 0.0) {
            return Err(Error::validation("degenerate principal axis"));
        }
        axis /= norm;
        let sign = sign_of_largest(axis.as_slice().expect("contiguous"));
        axis *= sign;
        axes.column_mut(i).assign(&axis);
    }
    let variance = eig.values[..k].iter().map(|v| v / n as f64).collect();
    Ok(Some((axes, variance)))
}
