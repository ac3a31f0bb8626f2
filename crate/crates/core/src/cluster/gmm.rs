use ndarray::Array2;

use super::kmeans::KmeansRun;

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Responsibility mass below which a component keeps its previous
/// parameters.
const EMPTY_COMPONENT: f64 = 1e-10;

pub(crate) struct GmmRun {
    pub labels: Vec<usize>,
    /// Mean per-point log-likelihood at each E-step.
    pub trace: Vec<f64>,
}

struct Params {
    weights: Vec<f64>,
    means: Array2<f64>,
    vars: Array2<f64>,
}

fn init_from_kmeans(x: &Array2<f64>, init: &KmeansRun, k: usize) -> Params {
    let (n, d) = x.dim();
    let mut counts = vec![0.0_f64; k];
    let mut vars = Array2::<f64>::zeros((k, d));
    for (row, &l) in x.rows().into_iter().zip(&init.labels) {
        counts[l] += 1.0;
        for j in 0..d {
            let diff = row[j] - init.centers[[l, j]];
            vars[[l, j]] += diff * diff;
        }
    }
    for c in 0..k {
        for j in 0..d {
            vars[[c, j]] = (vars[[c, j]] / counts[c].max(1.0)).max(VARIANCE_FLOOR);
        }
    }
    Params {
        weights: counts.iter().map(|&c| c / n as f64).collect(),
        means: init.centers.clone(),
        vars,
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-point log responsibilities and the mean log-likelihood.
fn e_step(x: &Array2<f64>, p: &Params) -> (Array2<f64>, f64) {
    let (n, d) = x.dim();
    let k = p.weights.len();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let norm: Vec<f64> = (0..k)
        .map(|c| {
            let log_det: f64 = p.vars.row(c).iter().map(|v| v.ln()).sum();
            p.weights[c].ln() - 0.5 * (d as f64 * ln_2pi + log_det)
        })
        .collect();
    let mut log_resp = Array2::zeros((n, k));
    let mut total = 0.0;
    let mut buf = vec![0.0; k];
    for (i, row) in x.rows().into_iter().enumerate() {
        for c in 0..k {
            let mut q = 0.0;
            for j in 0..d {
                let diff = row[j] - p.means[[c, j]];
                q += diff * diff / p.vars[[c, j]];
            }
            buf[c] = norm[c] - 0.5 * q;
        }
        let lse = log_sum_exp(&buf);
        total += lse;
        for c in 0..k {
            log_resp[[i, c]] = buf[c] - lse;
        }
    }
    (log_resp, total / n as f64)
}

fn m_step(x: &Array2<f64>, log_resp: &Array2<f64>, p: &mut Params) {
    let (n, d) = x.dim();
    for c in 0..p.weights.len() {
        let r: Vec<f64> = log_resp.column(c).iter().map(|v| v.exp()).collect();
        let nk: f64 = r.iter().sum();
        if nk < EMPTY_COMPONENT {
            continue;
        }
        p.weights[c] = nk / n as f64;
        for j in 0..d {
            let mean = (0..n).map(|i| r[i] * x[[i, j]]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| {
                    let diff = x[[i, j]] - mean;
                    r[i] * diff * diff
                })
                .sum::<f64>()
                / nk;
            p.means[[c, j]] = mean;
            p.vars[[c, j]] = var.max(VARIANCE_FLOOR);
        }
    }
}

/// Diagonal-covariance EM started from a k-means solution.
pub(crate) fn gmm(x: &Array2<f64>, init: &KmeansRun, k: usize, max_iter: usize, tolerance: f64) -> GmmRun {
    let mut params = init_from_kmeans(x, init, k);
    let mut trace = Vec::new();
    let mut log_resp;
    loop {
        let (lr, ll) = e_step(x, &params);
        log_resp = lr;
        let converged = trace.last().is_some_and(|&prev: &f64| ll - prev < tolerance);
        trace.push(ll);
        if converged || trace.len() > max_iter {
            break;
        }
        m_step(x, &log_resp, &mut params);
    }
    let labels = log_resp
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    GmmRun { labels, trace }
}
