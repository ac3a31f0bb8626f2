//! Stage glue shared by the command line and the test suites.

use ndarray::Array2;

use crate::cohort::{build_timelines, label_all, sample_cohort, LabeledCohort};
use crate::data::{generate_events, EventTable, GeneratorConfig};
use crate::error::Result;
use crate::featurize::{cohort_vocabulary, featurize, FeatureMatrix};

/// A labeled count matrix ready for reduction or classification.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub cohort: LabeledCohort,
    pub features: FeatureMatrix,
    pub x: Array2<f64>,
    /// True for CASE rows.
    pub y: Vec<bool>,
}

impl Dataset {
    /// Labels as cluster indices (CASE = 1, CONTROL = 0).
    pub fn truth(&self) -> Vec<usize> {
        self.y.iter().map(|&c| usize::from(c)).collect()
    }
}

/// Labels every patient in `events`, samples `n_per_class` of each label
/// and counts their pre-index events.
pub fn build_dataset(events: &EventTable, n_per_class: usize, seed: u64) -> Result<Dataset> {
    let timelines = build_timelines(events);
    let labeled = label_all(&timelines);
    let cohort = sample_cohort(&labeled, n_per_class, seed)?;
    let vocabulary = cohort_vocabulary(&cohort, &timelines)?;
    let features = featurize(&cohort, &timelines, &vocabulary)?;
    let x = features.to_f64();
    let y = cohort.patients.iter().map(|p| p.label.is_case()).collect();
    Ok(Dataset {
        cohort,
        features,
        x,
        y,
    })
}

/// Generates events and builds the full balanced dataset from them, using
/// `min(n_case, n_control)` patients per class.
pub fn synthetic_dataset(config: &GeneratorConfig) -> Result<Dataset> {
    let events = generate_events(config)?;
    build_dataset(&events, config.n_case.min(config.n_control), config.seed)
}
