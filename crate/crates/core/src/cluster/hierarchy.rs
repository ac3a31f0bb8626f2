use ndarray::Array2;

use super::Linkage;
use crate::linalg::pairwise_squared_distances;

pub(crate) struct MergeRun {
    /// Cluster representative per point after the last merge.
    pub roots: Vec<usize>,
    pub merge_costs: Vec<f64>,
}

/// Greedy agglomeration with Lance–Williams updates until `k` clusters
/// remain. Ward works on squared distances and reports the SSE increase
/// (half the updated distance) as the merge cost.
pub(crate) fn agglomerate(x: &Array2<f64>, k: usize, linkage: Linkage) -> MergeRun {
    let n = x.nrows();
    let mut d = pairwise_squared_distances(x);
    if linkage != Linkage::Ward {
        d.mapv_inplace(f64::sqrt);
    }
    let mut size = vec![1.0_f64; n];
    let mut active = vec![true; n];
    let mut roots: Vec<usize> = (0..n).collect();
    let mut merge_costs = Vec::with_capacity(n.saturating_sub(k));

    for _ in 0..n.saturating_sub(k) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[[i, j]] < best.2 {
                    best = (i, j, d[[i, j]]);
                }
            }
        }
        let (i, j, dij) = best;
        merge_costs.push(if linkage == Linkage::Ward { 0.5 * dij } else { dij });
        let (ni, nj) = (size[i], size[j]);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let (dmi, dmj) = (d[[m, i]], d[[m, j]]);
            let nm = size[m];
            let updated = match linkage {
                Linkage::Ward => ((ni + nm) * dmi + (nj + nm) * dmj - nm * dij) / (ni + nj + nm),
                Linkage::Average => (ni * dmi + nj * dmj) / (ni + nj),
                Linkage::Complete => dmi.max(dmj),
                Linkage::Single => dmi.min(dmj),
            };
            d[[m, i]] = updated;
            d[[i, m]] = updated;
        }
        size[i] += nj;
        active[j] = false;
        for r in roots.iter_mut() {
            if *r == j {
                *r = i;
            }
        }
    }
    MergeRun { roots, merge_costs }
}
