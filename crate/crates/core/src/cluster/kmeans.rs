use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::squared_distance;
use crate::par::{derive_seed, map_range};

pub(crate) struct KmeansRun {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    /// Inertia after each assignment step; the first entry is the k-means++
    /// initialization.
    pub trace: Vec<f64>,
}

impl KmeansRun {
    pub fn inertia(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Best of `restarts` k-means++/Lloyd runs by final inertia, lowest restart
/// index on ties.
pub(crate) fn kmeans(x: &Array2<f64>, k: usize, restarts: usize, max_iter: usize, seed: u64) -> KmeansRun {
    let runs = map_range(restarts.max(1), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        lloyd(x, plus_plus(x, k, &mut rng), max_iter)
    });
    runs.into_iter()
        .reduce(|best, run| if run.inertia() < best.inertia() { run } else { best })
        .expect("at least one restart")
}

fn plus_plus(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let mut nearest: Vec<f64> = x.rows().into_iter().map(|r| squared_distance(r, x.row(first))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            Err(_) => rng.random_range(0..n),
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, row) in x.rows().into_iter().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(row, centers.row(c)));
        }
    }
    centers
}

fn nearest_center(row: ArrayView1<f64>, centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d = squared_distance(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &Array2<f64>, centers: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    x.rows().into_iter().map(|r| nearest_center(r, centers)).unzip()
}

/// Lloyd iterations from the given centers until the assignment stops
/// changing or `max_iter` updates have run.
pub(crate) fn lloyd(x: &Array2<f64>, mut centers: Array2<f64>, max_iter: usize) -> KmeansRun {
    let k = centers.nrows();
    let (mut labels, dist) = assign(x, &centers);
    let mut trace = vec![dist.iter().sum()];
    for _ in 0..max_iter {
        let dist = dist_to(x, &labels, &centers);
        centers = update_centers(x, &mut labels, &dist, k);
        let (next, dist) = assign(x, &centers);
        trace.push(dist.iter().sum());
        let done = next == labels;
        labels = next;
        if done {
            break;
        }
    }
    KmeansRun { labels, centers, trace }
}

fn dist_to(x: &Array2<f64>, labels: &[usize], centers: &Array2<f64>) -> Vec<f64> {
    x.rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &l)| squared_distance(r, centers.row(l)))
        .collect()
}

/// Recomputes centroids. An empty cluster takes over the point farthest
/// from its current center.
fn update_centers(x: &Array2<f64>, labels: &mut [usize], dist: &[f64], k: usize) -> Array2<f64> {
    let mut dist = dist.to_vec();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] == 0 {
            let far = (0..dist.len())
                .filter(|&i| counts[labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
            }
        }
    }
    let mut centers = Array2::zeros((k, x.ncols()));
    for (row, &l) in x.rows().into_iter().zip(labels.iter()) {
        let mut c = centers.row_mut(l);
        c += &row;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            centers.row_mut(c).mapv_inplace(|v| v / n as f64);
        }
    }
    centers
}
