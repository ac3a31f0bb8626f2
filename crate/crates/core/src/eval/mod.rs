//! Partition agreement scores, ROC analysis and cross-validation.

mod cv;
mod metrics;
mod roc;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use cv::{cross_validate, kfold_cv, mean_std, plain_folds, stratified_folds, CvOptions, CvReport};
pub use metrics::{
    accuracy, adjusted_mutual_info, adjusted_rand, expected_mutual_info, mutual_info, ContingencyTable,
};
pub use roc::{auc, roc_auc, roc_curve, RocCurve};

pub const ROC_HEADER: &str = "threshold,fpr,tpr";

/// Writes `threshold,fpr,tpr` rows; the opening threshold is `inf`.
pub fn write_roc(curve: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::new();
    body.push_str(ROC_HEADER);
    body.push('\n');
    for (t, (fpr, tpr)) in curve.thresholds.iter().zip(&curve.points) {
        body.push_str(&format!("{t},{fpr},{tpr}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
