use ndarray::{Array1, Array2};
use serde::Serialize;

use super::gbdt::{binomial_loss, sigmoid};
use super::{ClassifierSpec, Standardizer};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogregModel {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    /// Gradient norm of the regularized objective at the returned weights.
    pub gradient_norm: f64,
}

impl LogregModel {
    pub fn decision_function(&self, x: &Array2<f64>) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let w = Array1::from(self.weights.clone());
        (z.dot(&w) + self.intercept).to_vec()
    }
}

struct Problem<'a> {
    z: &'a Array2<f64>,
    y: Array1<f64>,
    l2: f64,
}

impl Problem<'_> {
    /// Objective mean(loss) + l2/2·‖w‖² and its gradient; `theta` holds the
    /// weights followed by the unpenalized intercept.
    fn eval(&self, theta: &Array1<f64>) -> (f64, Array1<f64>) {
        let d = self.z.ncols();
        let n = self.z.nrows() as f64;
        let w = theta.slice(ndarray::s![..d]);
        let b = theta[d];
        let f = self.z.dot(&w) + b;
        let mut loss = 0.0;
        let mut r = Array1::zeros(f.len());
        for i in 0..f.len() {
            loss += binomial_loss(self.y[i], f[i]);
            r[i] = sigmoid(f[i]) - self.y[i];
        }
        let mut grad = Array1::zeros(d + 1);
        grad.slice_mut(ndarray::s![..d])
            .assign(&(self.z.t().dot(&r) / n + &w * self.l2));
        grad[d] = r.sum() / n;
        (loss / n + 0.5 * self.l2 * w.dot(&w), grad)
    }
}

/// Accelerated gradient descent with backtracking and function-value
/// restarts.
pub(crate) fn fit(spec: &ClassifierSpec, x: &Array2<f64>, y: &[bool]) -> Result<LogregModel> {
    let scaler = Standardizer::fit(x);
    let z = scaler.transform(x);
    let d = z.ncols();
    let problem = Problem {
        z: &z,
        y: y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        l2: spec.l2,
    };
    let mut theta = Array1::<f64>::zeros(d + 1);
    let (mut f_theta, mut g_theta) = problem.eval(&theta);
    let mut momentum = theta.clone();
    let mut t = 1.0_f64;
    let mut lipschitz = 0.25 + spec.l2;
    let mut iterations = 0;

    while iterations < spec.max_iter && norm(&g_theta) > spec.tolerance {
        iterations += 1;
        let (f_m, g_m) = problem.eval(&momentum);
        let mut next;
        let mut f_next;
        loop {
            next = &momentum - &(&g_m / lipschitz);
            f_next = problem.eval(&next).0;
            if f_next <= f_m - 0.5 * g_m.dot(&g_m) / lipschitz + 1e-15 * f_m.abs() {
                break;
            }
            lipschitz *= 2.0;
        }
        if f_next > f_theta {
            momentum = theta.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &next + &((&next - &theta) * ((t - 1.0) / t_next));
        t = t_next;
        theta = next;
        (f_theta, g_theta) = problem.eval(&theta);
        lipschitz *= 0.9;
    }

    Ok(LogregModel {
        scaler,
        weights: theta.slice(ndarray::s![..d]).to_vec(),
        intercept: theta[d],
        iterations,
        gradient_norm: norm(&g_theta),
    })
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}
