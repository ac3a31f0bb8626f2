//! Binary classifiers: logistic regression, CART, AdaBoost, gradient-boosted
//! trees and subgradient SVMs, with impurity-based feature importance.

mod adaboost;
mod gbdt;
mod logreg;
mod svm;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::all_finite;

pub use adaboost::{AdaboostModel, AdaboostStage};
pub use gbdt::{binomial_loss, mean_deviance, pseudo_residuals, sigmoid, GbdtModel, Stage, HESSIAN_FLOOR};
pub use logreg::LogregModel;
pub use svm::{KernelSvmModel, LinearSvmModel};
pub use tree::{Node, Tree};

use tree::{Criterion, TreeBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMethod {
    Logreg,
    Tree,
    Adaboost,
    Gbdt,
    SvmLinear,
    SvmRbf,
}

impl ClassifierMethod {
    pub const ALL: [ClassifierMethod; 6] = [
        ClassifierMethod::Logreg,
        ClassifierMethod::Tree,
        ClassifierMethod::Adaboost,
        ClassifierMethod::Gbdt,
        ClassifierMethod::SvmLinear,
        ClassifierMethod::SvmRbf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierMethod::Logreg => "logreg",
            ClassifierMethod::Tree => "tree",
            ClassifierMethod::Adaboost => "adaboost",
            ClassifierMethod::Gbdt => "gbdt",
            ClassifierMethod::SvmLinear => "svm_linear",
            ClassifierMethod::SvmRbf => "svm_rbf",
        }
    }
}

impl fmt::Display for ClassifierMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        ClassifierMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown classifier {s:?}"))
    }
}

/// Classifier choice plus every hyperparameter; fields irrelevant to the
/// chosen method are ignored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierSpec {
    pub method: ClassifierMethod,
    /// GBDT shrinkage α.
    pub learning_rate: f64,
    /// Depth limit for TREE and the GBDT regression trees.
    pub max_depth: usize,
    /// Boosting stages M for GBDT and AdaBoost.
    pub n_stages: usize,
    pub l2: f64,
    pub max_iter: usize,
    pub tolerance: f64,
    pub svm_lambda: f64,
    pub svm_iterations: usize,
    /// RBF gamma on standardized features; `None` means 1/d.
    pub svm_gamma: Option<f64>,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(method: ClassifierMethod) -> Self {
        ClassifierSpec {
            method,
            learning_rate: 0.25,
            max_depth: 5,
            n_stages: 100,
            l2: 1e-2,
            max_iter: 5000,
            tolerance: 1e-6,
            svm_lambda: 1e-2,
            svm_iterations: 1000,
            svm_gamma: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if self.n_stages == 0 {
            return Err(Error::validation("need at least one boosting stage"));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) || !positive(self.tolerance) {
            return Err(Error::validation("invalid logistic regression settings"));
        }
        if !positive(self.svm_lambda) || self.svm_iterations == 0 {
            return Err(Error::validation("invalid SVM settings"));
        }
        if let Some(g) = self.svm_gamma {
            if !positive(g) {
                return Err(Error::validation("SVM gamma must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-column z-scoring with population standard deviation; constant
/// columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from(self.scale.clone());
        (x - &mean) / &scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FittedState {
    Logreg(LogregModel),
    Tree(Tree),
    Adaboost(AdaboostModel),
    Gbdt(GbdtModel),
    SvmLinear(LinearSvmModel),
    SvmRbf(KernelSvmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    spec: ClassifierSpec,
    n_features: usize,
    state: FittedState,
}

fn check_training_data(x: &Array2<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x.nrows(),
        });
    }
    if !y.iter().any(|&b| b) || y.iter().all(|&b| b) {
        return Err(Error::validation("training labels contain a single class"));
    }
    if !all_finite(x) {
        return Err(Error::validation("feature matrix contains non-finite values"));
    }
    Ok(())
}

pub fn fit_classifier(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<TrainedClassifier> {
    spec.validate()?;
    check_training_data(x, y)?;
    let state = match spec.method {
        ClassifierMethod::Logreg => FittedState::Logreg(logreg::fit(spec, x, y)?),
        ClassifierMethod::Tree => FittedState::Tree(fit_tree(spec, x, y)?),
        ClassifierMethod::Adaboost => FittedState::Adaboost(adaboost::fit(spec, x, y)?),
        ClassifierMethod::Gbdt => FittedState::Gbdt(gbdt::fit(spec, x, y)?),
        ClassifierMethod::SvmLinear => FittedState::SvmLinear(svm::fit_linear(spec, x, y)?),
        ClassifierMethod::SvmRbf => FittedState::SvmRbf(svm::fit_rbf(spec, x, y)?),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        n_features: x.ncols(),
        state,
    })
}

/// Gradient-boosted trees under binomial deviance, regardless of
/// `spec.method`.
pub fn gbdt_fit(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<TrainedClassifier> {
    let spec = ClassifierSpec {
        method: ClassifierMethod::Gbdt,
        ..spec.clone()
    };
    fit_classifier(&spec, x, y)
}

fn fit_tree(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<Tree> {
    let target: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let weights = vec![1.0; y.len()];
    let leaf = |rows: &[usize]| rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64;
    TreeBuilder {
        x,
        target: &target,
        weights: &weights,
        criterion: Criterion::Entropy,
        max_depth: spec.max_depth,
        min_samples_split: 2,
    }
    .build(&leaf)
}

/// Normalized per-feature impurity decrease.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub weights: Vec<f64>,
}

impl FeatureImportance {
    fn from_raw(mut raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter_mut().for_each(|w| *w /= total);
        } else {
            raw.iter_mut().for_each(|w| *w = 0.0);
        }
        FeatureImportance { weights: raw }
    }

    /// Feature indices ordered by decreasing weight, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx
    }
}

impl TrainedClassifier {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn method(&self) -> ClassifierMethod {
        self.spec.method
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn state(&self) -> &FittedState {
        &self.state
    }

    pub fn gbdt(&self) -> Option<&GbdtModel> {
        match &self.state {
            FittedState::Gbdt(m) => Some(m),
            _ => None,
        }
    }

    pub fn logreg(&self) -> Option<&LogregModel> {
        match &self.state {
            FittedState::Logreg(m) => Some(m),
            _ => None,
        }
    }

    pub fn tree(&self) -> Option<&Tree> {
        match &self.state {
            FittedState::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn adaboost(&self) -> Option<&AdaboostModel> {
        match &self.state {
            FittedState::Adaboost(m) => Some(m),
            _ => None,
        }
    }

    /// Raw score whose logistic transform is [`Self::predict_proba`]. For
    /// TREE this is the leaf log-odds, clamped at ±30.
    pub fn decision_function(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(match &self.state {
            FittedState::Logreg(m) => m.decision_function(x),
            FittedState::Tree(t) => t
                .predict(x)
                .into_iter()
                .map(|p| (p / (1.0 - p)).ln().clamp(-30.0, 30.0))
                .collect(),
            FittedState::Adaboost(m) => m.decision_function(x),
            FittedState::Gbdt(m) => m.decision_function(x),
            FittedState::SvmLinear(m) => m.decision_function(x),
            FittedState::SvmRbf(m) => m.decision_function(x),
        })
    }

    /// Probability of CASE per row. SVM outputs are the logistic of the
    /// margin and are not calibrated.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if let FittedState::Tree(t) = &self.state {
            if x.ncols() != self.n_features {
                return Err(Error::Dimension {
                    expected: self.n_features,
                    got: x.ncols(),
                });
            }
            return Ok(t.predict(x));
        }
        Ok(self.decision_function(x)?.into_iter().map(sigmoid).collect())
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<bool>> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p >= 0.5).collect())
    }

    pub fn feature_importance(&self) -> Result<FeatureImportance> {
        let mut raw = vec![0.0; self.n_features];
        match &self.state {
            FittedState::Tree(t) => t.accumulate_gain(&mut raw, 1.0),
            FittedState::Gbdt(m) => m.stages.iter().for_each(|s| s.tree.accumulate_gain(&mut raw, 1.0)),
            FittedState::Adaboost(m) => m.stages.iter().for_each(|s| s.stump.accumulate_gain(&mut raw, 1.0)),
            _ => {
                return Err(Error::Unsupported(format!(
                    "feature importance is not defined for {}",
                    self.spec.method
                )))
            }
        }
        Ok(FeatureImportance::from_raw(raw))
    }

    /// JSON-ready summary; `feature_names` label the importance map and
    /// default to `f0, f1, …`.
    pub fn summary(&self, feature_names: Option<&[String]>) -> ModelSummary {
        let names: Vec<String> = match feature_names {
            Some(n) if n.len() == self.n_features => n.to_vec(),
            _ => (0..self.n_features).map(|j| format!("f{j}")).collect(),
        };
        let feature_importance = self.feature_importance().ok().map(|imp| {
            names
                .iter()
                .cloned()
                .zip(imp.weights)
                .collect::<BTreeMap<String, f64>>()
        });
        let (stage_count, base_score, deviance_trace) = match &self.state {
            FittedState::Gbdt(m) => (m.stages.len(), Some(m.base_score), Some(m.deviance_trace.clone())),
            FittedState::Adaboost(m) => (m.stages.len(), None, None),
            _ => (1, None, None),
        };
        ModelSummary {
            method: self.spec.method,
            hyperparameters: self.spec.clone(),
            n_features: self.n_features,
            stage_count,
            base_score,
            deviance_trace,
            feature_importance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub method: ClassifierMethod,
    pub hyperparameters: ClassifierSpec,
    pub n_features: usize,
    pub stage_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_importance: Option<BTreeMap<String, f64>>,
}
