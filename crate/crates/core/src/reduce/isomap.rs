use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use ndarray::Array2;

use super::kernel::center_kernel;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_squared_distances, symmetric_eigen};

/// ISOMAP: kNN graph geodesics embedded by classical MDS.
#[derive(Debug, Clone)]
pub struct IsomapModel {
    pub n_neighbors: usize,
    pub eigenvalues: Vec<f64>,
    pub(crate) train: Array2<f64>,
    pub(crate) embedding: Array2<f64>,
}

impl IsomapModel {
    pub(crate) fn fit(x: &Array2<f64>, k: usize, n_neighbors: usize) -> Result<Self> {
        if n_neighbors == 0 {
            return Err(Error::validation("isomap: n_neighbors must be positive"));
        }
        let n = x.nrows();
        let n_neighbors = n_neighbors.min(n - 1);
        let graph = knn_graph(x, n_neighbors);
        let components = count_components(&graph);
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        let rows = crate::par::map_range(n, |s| dijkstra(&graph, s));
        let mut sq = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let g = 0.5 * (rows[i][j] + rows[j][i]);
                sq[[i, j]] = -0.5 * g * g;
            }
        }
        let b = center_kernel(&sq)?;
        let eig = symmetric_eigen(&b)?;
        let kept = super::leading_positive(&eig.values, k);
        let mut embedding = Array2::zeros((n, kept));
        for i in 0..kept {
            let root = eig.values[i].sqrt();
            embedding.column_mut(i).assign(&(&eig.vectors.column(i) * root));
        }
        Ok(IsomapModel {
            n_neighbors,
            eigenvalues: eig.values[..kept].to_vec(),
            train: x.clone(),
            embedding,
        })
    }

    /// Only the training rows have coordinates; out-of-sample mapping is
    /// not supported.
    pub(crate) fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x == self.train {
            Ok(self.embedding.clone())
        } else {
            Err(Error::Unsupported(
                "isomap cannot embed rows outside the training set".into(),
            ))
        }
    }
}

type Graph = Vec<Vec<(usize, f64)>>;

/// Symmetrized k-nearest-neighbor graph with Euclidean edge weights.
/// Neighbor ties go to the lower index.
fn knn_graph(x: &Array2<f64>, k: usize) -> Graph {
    let n = x.nrows();
    let d2 = pairwise_squared_distances(x);
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d2[[i, a]].total_cmp(&d2[[i, b]]).then(a.cmp(&b)));
        for &j in others.iter().take(k) {
            let w = d2[[i, j]].sqrt();
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    adjacency
}

fn count_components(graph: &Graph) -> usize {
    let n = graph.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &graph[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    components
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(graph: &Graph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Frontier(0.0, source)]);
    while let Some(Frontier(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &graph[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier(nd, v));
            }
        }
    }
    dist
}
