//! Dense symmetric eigensolver and small matrix helpers.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm, relative to the full norm, at which the
/// Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
///
/// `values` are sorted non-increasing; column `i` of `vectors` is the unit
/// eigenvector for `values[i]`, with its largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations on a symmetric matrix.
///
/// Only the upper triangle of `a` is read.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }

    // Row-major working copy, symmetrized from the upper triangle.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = a[[i, j]];
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    // Rows of `vt` are the eigenvectors; keeps rotations cache-friendly.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let total: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, n);
        if off <= JACOBI_TOLERANCE * total || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "jacobi eigensolver".into(),
                iterations: sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut vt, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        let row = &vt[i * n..(i + 1) * n];
        let sign = sign_of_largest(row);
        for k in 0..n {
            vectors[[k, col]] = sign * row[k];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += 2.0 * m[i * n + j] * m[i * n + j];
        }
    }
    s.sqrt()
}

fn rotate(m: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = 0.5 * (aqq - app) / apq;
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let (row_p, row_q) = two_rows(m, n, p, q);
    for k in 0..n {
        let (x, y) = (row_p[k], row_q[k]);
        row_p[k] = c * x - s * y;
        row_q[k] = s * x + c * y;
    }
    row_p[p] = app - t * apq;
    row_q[q] = aqq + t * apq;
    row_p[q] = 0.0;
    row_q[p] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            m[k * n + p] = m[p * n + k];
            m[k * n + q] = m[q * n + k];
        }
    }

    let (vp, vq) = two_rows(vt, n, p, q);
    for k in 0..n {
        let (x, y) = (vp[k], vq[k]);
        vp[k] = c * x - s * y;
        vq[k] = s * x + c * y;
    }
}

fn two_rows(m: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = m.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}

/// +1 or -1 so that the largest-magnitude entry (first on ties) becomes positive.
pub fn sign_of_largest(v: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

pub fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Column means and the mean-centered copy of `x`.
pub fn center_columns(x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let mean = x
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()));
    let centered = x - &mean;
    (mean, centered)
}

/// Population variance of each column.
pub fn column_variances(x: &Array2<f64>) -> Array1<f64> {
    if x.nrows() == 0 {
        return Array1::zeros(x.ncols());
    }
    x.var_axis(Axis(0), 0.0)
}

/// Pairwise squared Euclidean distances between the rows of `x`.
pub fn pairwise_squared_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows = crate::par::map_range(n, |i| {
        (0..n)
            .map(|j| squared_distance(x.row(i), x.row(j)))
            .collect::<Vec<_>>()
    });
    let mut d = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            d[[i, j]] = v;
        }
    }
    d
}

pub fn all_finite(x: &Array2<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}
