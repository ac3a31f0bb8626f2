use ndarray::Array2;
use serde::Serialize;

use super::tree::{Criterion, Tree, TreeBuilder};
use super::ClassifierSpec;
use crate::error::Result;

/// Error floor applied to a perfect stump before computing its vote.
const PERFECT_STUMP_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaboostStage {
    pub stump: Tree,
    pub alpha: f64,
    pub weighted_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaboostModel {
    pub stages: Vec<AdaboostStage>,
}

impl AdaboostModel {
    /// Weighted vote Σ α_m·h_m(x) with h_m ∈ {−1, +1}.
    pub fn decision_function(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                self.stages
                    .iter()
                    .map(|s| s.alpha * vote(s.stump.predict_row(row)))
                    .sum()
            })
            .collect()
    }
}

fn vote(p: f64) -> f64 {
    if p >= 0.5 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn fit(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<AdaboostModel> {
    let n = y.len();
    let target: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let sign: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();

    for _ in 0..spec.n_stages {
        let w = weights.clone();
        let leaf = |rows: &[usize]| {
            let total: f64 = rows.iter().map(|&i| w[i]).sum();
            let pos: f64 = rows.iter().map(|&i| w[i] * target[i]).sum();
            if total > 0.0 {
                pos / total
            } else {
                0.5
            }
        };
        let stump = TreeBuilder {
            x,
            target: &target,
            weights: &weights,
            criterion: Criterion::Entropy,
            max_depth: 1,
            min_samples_split: 2,
        }
        .build(&leaf)?;
        let h: Vec<f64> = stump.predict(x).into_iter().map(vote).collect();
        let err: f64 = (0..n).filter(|&i| h[i] != sign[i]).map(|i| weights[i]).sum();
        if err >= 0.5 {
            break;
        }
        let perfect = err <= 0.0;
        let e = err.max(PERFECT_STUMP_ERROR);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        stages.push(AdaboostStage {
            stump,
            alpha,
            weighted_error: err,
        });
        if perfect {
            break;
        }
        for i in 0..n {
            weights[i] *= (-alpha * sign[i] * h[i]).exp();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(AdaboostModel { stages })
}
