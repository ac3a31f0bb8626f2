//! K-means, diagonal Gaussian mixtures, normalized spectral clustering and
//! agglomerative clustering, plus the reduction × clusterer agreement sweep.

mod gmm;
mod hierarchy;
mod kmeans;
mod sweep;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, pairwise_squared_distances, symmetric_eigen};
use crate::par::{derive_seed, tag};
use crate::reduce::default_gamma;

pub use gmm::VARIANCE_FLOOR;
pub use sweep::{
    clustering_sweep, read_sweep, write_sweep, Reduction, SweepCell, SweepConfig, SWEEP_HEADER,
    SWEEP_REDUCTIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    Kmeans,
    Gmm,
    Spectral,
    Agglomerative,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 4] = [
        ClusterMethod::Kmeans,
        ClusterMethod::Gmm,
        ClusterMethod::Spectral,
        ClusterMethod::Agglomerative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Gmm => "gmm",
            ClusterMethod::Spectral => "spectral",
            ClusterMethod::Agglomerative => "agglomerative",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.to_ascii_lowercase();
        ClusterMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown clustering method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Ward,
    Average,
    Complete,
    Single,
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ward" => Ok(Linkage::Ward),
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            _ => Err(format!("unknown linkage {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterConfig {
    pub method: ClusterMethod,
    pub n_clusters: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub gmm_max_iter: usize,
    pub gmm_tolerance: f64,
    /// Spectral affinity gamma; `None` uses the reducer default.
    pub affinity_gamma: Option<f64>,
    pub linkage: Linkage,
}

impl ClusterConfig {
    pub fn new(method: ClusterMethod) -> Self {
        ClusterConfig {
            method,
            n_clusters: 2,
            seed: 0,
            restarts: 10,
            max_iter: 300,
            gmm_max_iter: 200,
            gmm_tolerance: 1e-6,
            affinity_gamma: None,
            linkage: Linkage::Ward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// Final value of the objective for the chosen method.
    pub objective: f64,
    /// Per-iteration values of the objective for the chosen method.
    pub trace: Vec<f64>,
}

/// Renumbers labels by order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

pub fn fit_clusters(config: &ClusterConfig, x: &Array2<f64>) -> Result<ClusterAssignment> {
    let n = x.nrows();
    if config.n_clusters == 0 {
        return Err(Error::validation("n_clusters must be at least 1"));
    }
    if config.n_clusters > n {
        return Err(Error::validation(format!(
            "n_clusters {} exceeds {n} rows",
            config.n_clusters
        )));
    }
    if !all_finite(x) {
        return Err(Error::validation("cluster input contains non-finite values"));
    }
    let k = config.n_clusters;
    let (labels, objective, trace) = match config.method {
        ClusterMethod::Kmeans => {
            let run = kmeans::kmeans(x, k, config.restarts, config.max_iter, config.seed);
            (run.labels.clone(), run.inertia(), run.trace)
        }
        ClusterMethod::Gmm => {
            let init = kmeans::kmeans(x, k, config.restarts, config.max_iter, config.seed);
            let run = gmm::gmm(x, &init, k, config.gmm_max_iter, config.gmm_tolerance);
            let ll = *run.trace.last().expect("at least one E-step");
            (run.labels, ll, run.trace)
        }
        ClusterMethod::Spectral => {
            let gamma = config.affinity_gamma.unwrap_or_else(|| default_gamma(x));
            let embedded = spectral_embedding(x, k, gamma)?;
            let seed = derive_seed(config.seed, &[tag("spectral")]);
            let run = kmeans::kmeans(&embedded, k, config.restarts, config.max_iter, seed);
            (run.labels.clone(), run.inertia(), run.trace)
        }
        ClusterMethod::Agglomerative => {
            let run = hierarchy::agglomerate(x, k, config.linkage);
            let total = run.merge_costs.iter().sum();
            (run.roots, total, run.merge_costs)
        }
    };
    Ok(ClusterAssignment {
        labels: canonical_labels(&labels),
        objective,
        trace,
    })
}

/// Rows of the leading `k` eigenvectors of D^{-1/2} A D^{-1/2}, scaled to
/// unit length. These are the bottom eigenvectors of the symmetric
/// normalized Laplacian.
pub fn spectral_embedding(x: &Array2<f64>, k: usize, gamma: f64) -> Result<Array2<f64>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation("affinity gamma must be positive"));
    }
    let n = x.nrows();
    let mut a = pairwise_squared_distances(x).mapv(|d| (-gamma * d).exp());
    for i in 0..n {
        a[[i, i]] = 0.0;
    }
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| {
            let deg = r.sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = symmetric_eigen(&a)?;
    let mut u = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    for mut row in u.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::adjusted_rand;

    fn blobs() -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((30, 2));
        let mut truth = Vec::new();
        for i in 0..30 {
            let c = i % 2;
            let jitter = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
            x[[i, 0]] = c as f64 * 20.0 + jitter;
            x[[i, 1]] = c as f64 * -20.0 + 0.5 * jitter * jitter;
            truth.push(c);
        }
        (x, truth)
    }

    #[test]
    fn every_method_recovers_blobs() {
        let (x, truth) = blobs();
        for m in ClusterMethod::ALL {
            let a = fit_clusters(&ClusterConfig::new(m), &x).unwrap();
            assert_eq!(adjusted_rand(&a.labels, &truth).unwrap(), 1.0, "{m}");
        }
    }

    #[test]
    fn single_cluster_is_all_zero() {
        let (x, _) = blobs();
        for m in ClusterMethod::ALL {
            let mut cfg = ClusterConfig::new(m);
            cfg.n_clusters = 1;
            assert!(fit_clusters(&cfg, &x).unwrap().labels.iter().all(|&l| l == 0), "{m}");
        }
    }

    #[test]
    fn too_many_clusters_rejected() {
        let x = Array2::zeros((3, 2));
        let mut cfg = ClusterConfig::new(ClusterMethod::Kmeans);
        cfg.n_clusters = 4;
        assert!(fit_clusters(&cfg, &x).is_err());
    }

    #[test]
    fn ward_costs_non_decreasing() {
        let (x, _) = blobs();
        let mut cfg = ClusterConfig::new(ClusterMethod::Agglomerative);
        cfg.n_clusters = 1;
        let a = fit_clusters(&cfg, &x).unwrap();
        assert_eq!(a.trace.len(), 29);
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(canonical_labels(&[4, 4, 1, 7, 1]), vec![0, 0, 1, 2, 1]);
    }
}
