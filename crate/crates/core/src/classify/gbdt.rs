use ndarray::Array2;
use serde::Serialize;

use super::tree::{Criterion, Tree, TreeBuilder};
use super::ClassifierSpec;
use crate::error::Result;

/// Number of times a stage's step is halved when it would raise the
/// training deviance.
const MAX_STEP_HALVINGS: usize = 30;

/// Guard on the Newton denominator Σp(1−p).
pub const HESSIAN_FLOOR: f64 = 1e-12;

pub fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of label `y` (0 or 1) at log-odds `f`:
/// ln(1 + e^f) − y·f.
pub fn binomial_loss(y: f64, f: f64) -> f64 {
    let softplus = if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    };
    softplus - y * f
}

/// Negative gradient of [`binomial_loss`] with respect to `f`, per row.
pub fn pseudo_residuals(y: &[f64], f: &[f64]) -> Vec<f64> {
    y.iter().zip(f).map(|(&y, &f)| y - sigmoid(f)).collect()
}

/// Mean binomial deviance, 2·mean(loss).
pub fn mean_deviance(y: &[f64], f: &[f64]) -> f64 {
    2.0 * y.iter().zip(f).map(|(&y, &f)| binomial_loss(y, f)).sum::<f64>() / y.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub tree: Tree,
    /// Step applied to this stage's tree output.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub stages: Vec<Stage>,
    /// Training deviance before any stage, then after each stage.
    pub deviance_trace: Vec<f64>,
}

impl GbdtModel {
    pub fn decision_function(&self, x: &Array2<f64>) -> Vec<f64> {
        let mut f = vec![self.base_score; x.nrows()];
        for stage in &self.stages {
            for (fi, row) in f.iter_mut().zip(x.rows()) {
                *fi += stage.step * stage.tree.predict_row(row);
            }
        }
        f
    }
}

pub(crate) fn fit(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<GbdtModel> {
    let n = y.len();
    let target: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let p_bar = target.iter().sum::<f64>() / n as f64;
    let base_score = (p_bar / (1.0 - p_bar)).ln();
    let mut f = vec![base_score; n];
    let mut deviance = mean_deviance(&target, &f);
    let mut trace = vec![deviance];
    let weights = vec![1.0; n];
    let mut stages = Vec::with_capacity(spec.n_stages);

    for _ in 0..spec.n_stages {
        let residuals = pseudo_residuals(&target, &f);
        let hessian: Vec<f64> = f
            .iter()
            .map(|&fi| {
                let p = sigmoid(fi);
                p * (1.0 - p)
            })
            .collect();
        let leaf_value = |rows: &[usize]| {
            let num: f64 = rows.iter().map(|&i| residuals[i]).sum();
            let den: f64 = rows.iter().map(|&i| hessian[i]).sum();
            num / den.max(HESSIAN_FLOOR)
        };
        let tree = TreeBuilder {
            x,
            target: &residuals,
            weights: &weights,
            criterion: Criterion::Variance,
            max_depth: spec.max_depth,
            min_samples_split: 2,
        }
        .build(&leaf_value)?;
        let update = tree.predict(x);

        let mut step = spec.learning_rate;
        let mut candidate: Vec<f64>;
        let mut halvings = 0;
        loop {
            candidate = f.iter().zip(&update).map(|(&fi, &u)| fi + step * u).collect();
            let d = mean_deviance(&target, &candidate);
            if d <= deviance {
                deviance = d;
                break;
            }
            halvings += 1;
            if halvings > MAX_STEP_HALVINGS {
                step = 0.0;
                candidate = f.clone();
                break;
            }
            step *= 0.5;
        }
        f = candidate;
        trace.push(deviance);
        stages.push(Stage { tree, step });
    }

    Ok(GbdtModel {
        base_score,
        stages,
        deviance_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_is_stable_at_extremes() {
        assert!(binomial_loss(1.0, 800.0).abs() < 1e-12);
        assert!((binomial_loss(0.0, 800.0) - 800.0).abs() < 1e-9);
        assert!((binomial_loss(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn residual_matches_central_difference() {
        let eps = 1e-4;
        for &(y, f) in &[(0.0, -1.3), (1.0, 0.2), (1.0, 4.0), (0.0, 2.5)] {
            let fd = (binomial_loss(y, f - eps) - binomial_loss(y, f + eps)) / (2.0 * eps);
            let r = pseudo_residuals(&[y], &[f])[0];
            assert!((fd - r).abs() < 1e-6);
        }
    }
}
