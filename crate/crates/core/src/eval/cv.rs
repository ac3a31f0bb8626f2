use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::metrics::accuracy;
use super::roc::roc_auc;
use crate::classify::{fit_classifier, ClassifierSpec};
use crate::error::{Error, Result};
use crate::par::{derive_seed, map_range, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Preserve class proportions per fold; plain shuffled k-fold otherwise.
    pub stratified: bool,
}

impl CvOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        CvOptions {
            k,
            seed,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
    /// Held-out AUC per fold; NaN (null in JSON) when a fold lacks a class.
    pub fold_auc: Vec<f64>,
    #[serde(skip)]
    pub folds: Vec<usize>,
    /// Held-out CASE probability for every row.
    #[serde(skip)]
    pub oof_scores: Vec<f64>,
}

/// Stratified assignment of rows to folds `0..k`. Each class is shuffled and
/// dealt round-robin, continuing the deal where the previous class stopped.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::validation("need at least two folds"));
    }
    let mut folds = vec![0; y.len()];
    let mut offset = 0;
    for (c, class) in [true, false].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(Error::validation(format!(
                "class {} has {} members, fewer than {k} folds",
                if class { "CASE" } else { "CONTROL" },
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag("stratify"), c as u64]));
        members.shuffle(&mut rng);
        for (p, &i) in members.iter().enumerate() {
            folds[i] = (offset + p) % k;
        }
        offset += members.len();
    }
    Ok(folds)
}

pub fn plain_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || n < k {
        return Err(Error::validation(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag("plain")]));
    order.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        folds[i] = p % k;
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation.
pub fn kfold_cv(x: &Array2<f64>, y: &[bool], spec: &ClassifierSpec, k: usize, seed: u64) -> Result<CvReport> {
    cross_validate(x, y, spec, &CvOptions::new(k, seed))
}

pub fn cross_validate(x: &Array2<f64>, y: &[bool], spec: &ClassifierSpec, opts: &CvOptions) -> Result<CvReport> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x.nrows(),
        });
    }
    let folds = if opts.stratified {
        stratified_folds(y, opts.k, opts.seed)?
    } else {
        plain_folds(y.len(), opts.k, opts.seed)?
    };
    let results = map_range(opts.k, |f| -> Result<(Vec<usize>, Vec<f64>, f64, f64)> {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        let x_train = x.select(Axis(0), &train);
        let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let x_test = x.select(Axis(0), &test);
        let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let fold_spec = ClassifierSpec {
            seed: derive_seed(opts.seed, &[tag("fold"), f as u64]),
            ..spec.clone()
        };
        let model = fit_classifier(&fold_spec, &x_train, &y_train)?;
        let proba = model.predict_proba(&x_test)?;
        let predicted: Vec<bool> = proba.iter().map(|&p| p >= 0.5).collect();
        let acc = accuracy(&predicted, &y_test)?;
        let auc = roc_auc(&proba, &y_test).unwrap_or(f64::NAN);
        Ok((test, proba, acc, auc))
    });

    let mut oof_scores = vec![f64::NAN; y.len()];
    let mut fold_accuracy = Vec::with_capacity(opts.k);
    let mut fold_auc = Vec::with_capacity(opts.k);
    for r in results {
        let (test, proba, acc, auc) = r?;
        for (i, p) in test.into_iter().zip(proba) {
            oof_scores[i] = p;
        }
        fold_accuracy.push(acc);
        fold_auc.push(auc);
    }
    let (mean, std) = mean_std(&fold_accuracy);
    Ok(CvReport {
        k: opts.k,
        seed: opts.seed,
        fold_accuracy,
        mean,
        std,
        fold_auc,
        folds,
        oof_scores,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
