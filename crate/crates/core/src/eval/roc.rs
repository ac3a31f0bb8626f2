use serde::Serialize;

use crate::error::{Error, Result};

/// Receiver operating characteristic curve.
///
/// `thresholds[i]` is the score cut producing `points[i]` (rows with score
/// ≥ threshold predicted positive); the first threshold is +∞.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

/// Sweeps descending unique score thresholds. Tied scores move the curve in
/// a single (possibly diagonal) step.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::validation("ROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.first() != Some(&(0.0, 0.0)) || pts.last() != Some(&(1.0, 1.0)) {
        return Err(Error::validation("ROC curve must run from (0,0) to (1,1)"));
    }
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum())
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    auc(&roc_curve(scores, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_swept_curve() {
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(auc(&c).unwrap(), 1.0);
    }

    #[test]
    fn all_tied() {
        let c = roc_curve(&[0.4; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&c).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_curve(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn monotone_coordinates() {
        let c = roc_curve(&[0.1, 0.7, 0.7, 0.3, 0.9, 0.2], &[false, true, false, true, true, false]).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }
}
