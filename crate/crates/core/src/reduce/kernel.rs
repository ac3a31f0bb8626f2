use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{column_variances, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(KernelSpec::Rbf { gamma })
        } else {
            Err(Error::validation(format!("RBF gamma must be positive, got {gamma}")))
        }
    }

    pub fn evaluate(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

/// `exp(-gamma * ||a - b||^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let spec = KernelSpec::rbf(gamma)?;
    Ok(spec.evaluate(ArrayView1::from(a), ArrayView1::from(b)))
}

/// Kernel matrix between the rows of `x` and the rows of `y`.
pub fn gram(spec: &KernelSpec, x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let (n, m) = (x.nrows(), y.nrows());
    let rows = crate::par::map_range(n, |i| {
        (0..m).map(|j| spec.evaluate(x.row(i), y.row(j))).collect::<Vec<_>>()
    });
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).expect("n*m entries")
}

/// Symmetric kernel matrix of `x` against itself; fills both triangles from
/// one evaluation so the result is exactly symmetric.
pub fn gram_symmetric(spec: &KernelSpec, x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows = crate::par::map_range(n, |i| {
        (i..n).map(|j| spec.evaluate(x.row(i), x.row(j))).collect::<Vec<_>>()
    });
    let mut k = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            k[[i, i + off]] = v;
            k[[i + off, i]] = v;
        }
    }
    k
}

/// Double-centers a kernel matrix: `K - 1K - K1 + 1K1` with `1` the matrix of `1/n`.
pub fn center_kernel(k: &Array2<f64>) -> Result<Array2<f64>> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: k.ncols(),
        });
    }
    if n == 0 {
        return Ok(k.clone());
    }
    let col_means = k.mean_axis(Axis(0)).expect("n > 0");
    let row_means = k.mean_axis(Axis(1)).expect("n > 0");
    let grand = col_means.mean().expect("n > 0");
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] += grand - row_means[i] - col_means[j];
        }
    }
    Ok(out)
}

/// Centers a block of test-vs-train kernel rows with the training statistics.
pub(crate) fn center_test_kernel(k_test: &Array2<f64>, train_col_means: &Array1<f64>, grand: f64) -> Array2<f64> {
    let mut out = k_test.clone();
    for (mut row, orig) in out.rows_mut().into_iter().zip(k_test.rows()) {
        let row_mean = orig.mean().unwrap_or(0.0);
        for (v, cm) in row.iter_mut().zip(train_col_means.iter()) {
            *v += grand - row_mean - cm;
        }
    }
    out
}

/// `1 / (n_features * mean feature variance)`, or `1 / n_features` when every
/// column is constant.
pub fn default_gamma(x: &Array2<f64>) -> f64 {
    let d = x.ncols().max(1) as f64;
    let mean_var = column_variances(x).mean().unwrap_or(0.0);
    if mean_var > 0.0 && mean_var.is_finite() {
        1.0 / (d * mean_var)
    } else {
        1.0 / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.5, 2.0], &[1.5, 2.0], 3.0).unwrap(), 1.0);
        assert!((rbf_kernel(&[0.0], &[1.0], 1.0).unwrap() - 0.367_879_441_171_442_33).abs() < 1e-15);
        // ||(1,2)-(3,4)||^2 = 8
        assert!((rbf_kernel(&[1.0, 2.0], &[3.0, 4.0], 0.5).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(rbf_kernel(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn centering() {
        let ones = Array2::from_elem((3, 3), 1.0);
        assert!(center_kernel(&ones).unwrap().iter().all(|v| v.abs() < 1e-15));

        let k = array![
            [1.0, 0.3, -0.2, 0.5],
            [0.3, 2.0, 0.1, -0.7],
            [-0.2, 0.1, 0.9, 0.4],
            [0.5, -0.7, 0.4, 1.3]
        ];
        let c = center_kernel(&k).unwrap();
        for s in c.sum_axis(Axis(0)).iter().chain(c.sum_axis(Axis(1)).iter()) {
            assert!(s.abs() < 1e-10);
        }
        let again = center_kernel(&c).unwrap();
        assert!((&again - &c).iter().all(|v| v.abs() < 1e-12));
        assert!(center_kernel(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn test_centering_matches_training_centering() {
        let x = array![[0.0, 1.0], [2.0, 0.5], [1.0, 1.0], [3.0, -1.0]];
        let spec = KernelSpec::rbf(0.3).unwrap();
        let k = gram_symmetric(&spec, &x);
        let col_means = k.mean_axis(Axis(0)).unwrap();
        let grand = col_means.mean().unwrap();
        let c1 = center_kernel(&k).unwrap();
        let c2 = center_test_kernel(&gram(&spec, &x, &x), &col_means, grand);
        assert!((&c1 - &c2).iter().all(|v| v.abs() < 1e-14));
    }
}
