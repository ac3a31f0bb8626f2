use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};

/// Node impurity used to score candidate splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    /// Weighted binary entropy of a 0/1 target (information gain).
    Entropy,
    /// Weighted variance of a real-valued target.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Impurity decrease weighted by the node's share of training weight.
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// Binary decision tree with axis-aligned `x[feature] <= threshold` splits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Adds this tree's split gains into `acc`, indexed by feature.
    pub(crate) fn accumulate_gain(&self, acc: &mut [f64], scale: f64) {
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                acc[*feature] += scale * gain;
            }
        }
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub x: &'a Array2<f64>,
    pub target: &'a [f64],
    pub weights: &'a [f64],
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Stats {
    fn zero() -> Self {
        Stats { w: 0.0, wy: 0.0, wyy: 0.0 }
    }

    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
    }

    /// Node impurity multiplied by node weight.
    fn weighted_impurity(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Entropy => {
                let p = (self.wy / self.w).clamp(0.0, 1.0);
                let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
                self.w * (h(p) + h(1.0 - p))
            }
            Criterion::Variance => (self.wyy - self.wy * self.wy / self.w).max(0.0),
        }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// Grows the tree greedily; `leaf_value` maps a leaf's member rows to
    /// its output.
    pub fn build(&self, leaf_value: &dyn Fn(&[usize]) -> f64) -> Result<Tree> {
        let n = self.x.nrows();
        if self.target.len() != n || self.weights.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.target.len().min(self.weights.len()),
            });
        }
        let total_w: f64 = self.weights.iter().sum();
        if total_w <= 0.0 {
            return Err(Error::validation("tree weights sum to zero"));
        }
        let mut nodes = Vec::new();
        let rows: Vec<usize> = (0..n).collect();
        self.grow(&mut nodes, rows, 0, total_w, leaf_value);
        Ok(Tree {
            nodes,
            n_features: self.x.ncols(),
        })
    }

    fn grow(
        &self,
        nodes: &mut Vec<Node>,
        rows: Vec<usize>,
        depth: usize,
        total_w: f64,
        leaf_value: &dyn Fn(&[usize]) -> f64,
    ) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf {
            value: leaf_value(&rows),
            samples: rows.len(),
        });
        if depth >= self.max_depth || rows.len() < self.min_samples_split.max(2) {
            return id;
        }
        let mut stats = Stats::zero();
        for &i in &rows {
            stats.add(self.weights[i], self.target[i]);
        }
        let parent = stats.weighted_impurity(self.criterion);
        if parent <= 1e-14 * stats.w.max(1.0) {
            return id;
        }
        let Some(best) = self.best_split(&rows, &stats, parent) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
        let left = self.grow(nodes, left_rows, depth + 1, total_w, leaf_value);
        let right = self.grow(nodes, right_rows, depth + 1, total_w, leaf_value);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: (best.gain / total_w).max(0.0),
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], node: &Stats, parent: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for f in 0..self.x.ncols() {
            let col = self.x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left = Stats::zero();
            for w in 0..order.len() - 1 {
                let i = order[w];
                left.add(self.weights[i], self.target[i]);
                let (lo, hi) = (col[i], col[order[w + 1]]);
                if lo == hi {
                    continue;
                }
                let right = Stats {
                    w: node.w - left.w,
                    wy: node.wy - left.wy,
                    wyy: node.wyy - left.wyy,
                };
                let gain = parent
                    - left.weighted_impurity(self.criterion)
                    - right.weighted_impurity(self.criterion);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: lo + (hi - lo) * 0.5,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn mean_leaf<'a>(t: &'a [f64]) -> impl Fn(&[usize]) -> f64 + 'a {
        move |rows| rows.iter().map(|&i| t[i]).sum::<f64>() / rows.len() as f64
    }

    #[test]
    fn single_split_on_informative_feature() {
        let x = array![[0.0, 5.0], [0.0, 1.0], [0.0, 2.0], [0.0, 7.0]];
        let y = [1.0, 0.0, 0.0, 1.0];
        let w = [1.0; 4];
        let b = TreeBuilder {
            x: &x,
            target: &y,
            weights: &w,
            criterion: Criterion::Entropy,
            max_depth: 3,
            min_samples_split: 2,
        };
        let t = b.build(&mean_leaf(&y)).unwrap();
        assert_eq!(t.depth(), 1);
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 1);
                assert_eq!(threshold, 3.5);
            }
            _ => panic!("expected split"),
        }
        assert_eq!(t.predict(&x), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn depth_zero_is_single_leaf() {
        let x = array![[0.0], [1.0]];
        let y = [0.0, 1.0];
        let b = TreeBuilder {
            x: &x,
            target: &y,
            weights: &[1.0, 1.0],
            criterion: Criterion::Variance,
            max_depth: 0,
            min_samples_split: 2,
        };
        let t = b.build(&mean_leaf(&y)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&x), vec![0.5, 0.5]);
    }

    #[test]
    fn gain_ties_prefer_lowest_feature() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let y = [0.0, 1.0];
        let b = TreeBuilder {
            x: &x,
            target: &y,
            weights: &[1.0, 1.0],
            criterion: Criterion::Variance,
            max_depth: 1,
            min_samples_split: 2,
        };
        let t = b.build(&mean_leaf(&y)).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }
}
