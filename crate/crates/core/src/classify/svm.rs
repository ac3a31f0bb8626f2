use ndarray::{Array1, Array2};
use serde::Serialize;

use super::{ClassifierSpec, Standardizer};
use crate::error::Result;
use crate::reduce::{gram, KernelSpec};

/// Primal linear SVM on standardized features; the last weight multiplies a
/// constant 1 feature and plays the role of the bias.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSvmModel {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub objective: f64,
}

impl LinearSvmModel {
    pub fn decision_function(&self, x: &Array2<f64>) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let d = z.ncols();
        let w = Array1::from(self.weights[..d].to_vec());
        (z.dot(&w) + self.weights[d]).to_vec()
    }
}

/// Kernel SVM in dual-coefficient form, f(x) = Σ β_i·(k(x_i, x) + 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSvmModel {
    pub scaler: Standardizer,
    pub kernel: KernelSpec,
    #[serde(skip)]
    pub train: Array2<f64>,
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

impl KernelSvmModel {
    pub fn decision_function(&self, x: &Array2<f64>) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let k = gram(&self.kernel, &z, &self.train) + 1.0;
        k.dot(&Array1::from(self.coefficients.clone())).to_vec()
    }

    pub fn support_vectors(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }
}

fn signs(y: &[bool]) -> Array1<f64> {
    y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()
}

fn mean_hinge(margins: &Array1<f64>, s: &Array1<f64>) -> f64 {
    margins
        .iter()
        .zip(s)
        .map(|(&m, &y)| (1.0 - y * m).max(0.0))
        .sum::<f64>()
        / s.len() as f64
}

/// Full-batch Pegasos subgradient descent with step 1/(λt), projection onto
/// the ‖w‖ ≤ 1/√λ ball, keeping the best iterate seen.
pub(crate) fn fit_linear(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<LinearSvmModel> {
    let scaler = Standardizer::fit(x);
    let z = scaler.transform(x);
    let (n, d) = z.dim();
    let mut za = Array2::<f64>::ones((n, d + 1));
    za.slice_mut(ndarray::s![.., ..d]).assign(&z);
    let s = signs(y);
    let lambda = spec.svm_lambda;
    let radius = 1.0 / lambda.sqrt();

    let mut w = Array1::<f64>::zeros(d + 1);
    let mut best = (f64::INFINITY, w.clone());
    for t in 1..=spec.svm_iterations {
        let margins = za.dot(&w);
        let objective = 0.5 * lambda * w.dot(&w) + mean_hinge(&margins, &s);
        if objective < best.0 {
            best = (objective, w.clone());
        }
        let mut g = &w * lambda;
        for i in 0..n {
            if s[i] * margins[i] < 1.0 {
                g.scaled_add(-s[i] / n as f64, &za.row(i));
            }
        }
        w = w - g * (1.0 / (lambda * t as f64));
        let norm = w.dot(&w).sqrt();
        if norm > radius {
            w *= radius / norm;
        }
    }
    let margins = za.dot(&w);
    let objective = 0.5 * lambda * w.dot(&w) + mean_hinge(&margins, &s);
    if objective < best.0 {
        best = (objective, w);
    }
    Ok(LinearSvmModel {
        scaler,
        weights: best.1.to_vec(),
        objective: best.0,
    })
}

/// Kernelized full-batch Pegasos on the augmented kernel k + 1.
pub(crate) fn fit_rbf(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<KernelSvmModel> {
    let scaler = Standardizer::fit(x);
    let z = scaler.transform(x);
    let n = z.nrows();
    let gamma = spec.svm_gamma.unwrap_or(1.0 / z.ncols() as f64);
    let kernel = KernelSpec::rbf(gamma)?;
    let k = gram(&kernel, &z, &z) + 1.0;
    let s = signs(y);
    let lambda = spec.svm_lambda;

    let mut beta = Array1::<f64>::zeros(n);
    let mut best = (f64::INFINITY, beta.clone());
    for t in 1..=spec.svm_iterations + 1 {
        let margins = k.dot(&beta);
        let objective = 0.5 * lambda * beta.dot(&margins) + mean_hinge(&margins, &s);
        if objective < best.0 {
            best = (objective, beta.clone());
        }
        if t > spec.svm_iterations {
            break;
        }
        let eta = 1.0 / (lambda * t as f64);
        beta *= 1.0 - eta * lambda;
        for i in 0..n {
            if s[i] * margins[i] < 1.0 {
                beta[i] += eta * s[i] / n as f64;
            }
        }
    }
    Ok(KernelSvmModel {
        scaler,
        kernel,
        train: z,
        coefficients: best.1.to_vec(),
        objective: best.0,
    })
}
