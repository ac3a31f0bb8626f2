//! Cohort construction: per-patient timelines, index dating at the first AED
//! failure, case/control labeling and balanced subsampling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{EventKind, EventRecord, EventTable};
use crate::error::{Error, Result};

pub const COHORT_HEADER: &str = "patient_id,index_day,label";

/// Failures strictly after the index date needed for a CASE label.
pub const CASE_MIN_FUTURE_FAILURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CohortLabel {
    Case,
    Control,
}

impl CohortLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CohortLabel::Case => "CASE",
            CohortLabel::Control => "CONTROL",
        }
    }

    pub fn is_case(self) -> bool {
        self == CohortLabel::Case
    }
}

impl fmt::Display for CohortLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CohortLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "CASE" => Ok(CohortLabel::Case),
            "CONTROL" => Ok(CohortLabel::Control),
            _ => Err(format!("unknown cohort label {s:?}")),
        }
    }
}

/// All events of one patient, sorted by day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientTimeline {
    pub patient_id: String,
    events: Vec<EventRecord>,
}

impl PatientTimeline {
    /// Builds a timeline, stably sorting the events by day.
    pub fn new(patient_id: impl Into<String>, mut events: Vec<EventRecord>) -> Result<Self> {
        let patient_id = patient_id.into();
        if let Some(e) = events.iter().find(|e| e.patient_id != patient_id) {
            return Err(Error::validation(format!(
                "event for {} in timeline of {patient_id}",
                e.patient_id
            )));
        }
        events.sort_by_key(|e| e.day);
        Ok(PatientTimeline { patient_id, events })
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn failure_days(&self) -> impl Iterator<Item = u32> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::AedFailure)
            .map(|e| e.day)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledPatient {
    pub patient_id: String,
    pub index_day: u32,
    pub label: CohortLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCohort {
    pub patients: Vec<LabeledPatient>,
    /// Seed used by [`sample_cohort`]; `None` for cohorts loaded from disk.
    pub sampling_seed: Option<u64>,
}

impl LabeledCohort {
    pub fn count(&self, label: CohortLabel) -> usize {
        self.patients.iter().filter(|p| p.label == label).count()
    }

    pub fn labels(&self) -> Vec<CohortLabel> {
        self.patients.iter().map(|p| p.label).collect()
    }
}

/// Groups events per patient. Timelines come back ordered by patient id.
pub fn build_timelines(table: &EventTable) -> Vec<PatientTimeline> {
    let mut groups: BTreeMap<&str, Vec<EventRecord>> = BTreeMap::new();
    for r in table.records() {
        groups.entry(&r.patient_id).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(pid, mut events)| {
            events.sort_by_key(|e| e.day);
            PatientTimeline {
                patient_id: pid.to_string(),
                events,
            }
        })
        .collect()
}

/// Labels a patient from their AED failure days.
///
/// The index day is the first failure. Four or more failures strictly after
/// it make a CASE; a single failure in total makes a CONTROL. Patients with
/// one to three later failures, or none at all, are excluded.
pub fn label_patient(timeline: &PatientTimeline) -> Option<LabeledPatient> {
    let index_day = timeline.failure_days().min()?;
    let total = timeline.failure_days().count();
    let future = timeline.failure_days().filter(|&d| d > index_day).count();
    let label = if future >= CASE_MIN_FUTURE_FAILURES {
        CohortLabel::Case
    } else if future == 0 && total == 1 {
        CohortLabel::Control
    } else {
        return None;
    };
    Some(LabeledPatient {
        patient_id: timeline.patient_id.clone(),
        index_day,
        label,
    })
}

pub fn label_all(timelines: &[PatientTimeline]) -> Vec<LabeledPatient> {
    timelines.iter().filter_map(label_patient).collect()
}

/// Events strictly before `index_day`.
pub fn pre_index_events(timeline: &PatientTimeline, index_day: u32) -> &[EventRecord] {
    let end = timeline.events.partition_point(|e| e.day < index_day);
    &timeline.events[..end]
}

/// Draws `n_per_class` patients of each label uniformly without replacement.
///
/// The two draws use independent RNG streams of `seed`. The result lists
/// every CASE (sorted by id) followed by every CONTROL (sorted by id).
pub fn sample_cohort(
    labeled: &[LabeledPatient],
    n_per_class: usize,
    seed: u64,
) -> Result<LabeledCohort> {
    let mut patients = Vec::with_capacity(2 * n_per_class);
    for (stream, label) in [(0, CohortLabel::Case), (1, CohortLabel::Control)] {
        let mut pool: Vec<&LabeledPatient> = labeled.iter().filter(|p| p.label == label).collect();
        pool.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
        if let Some(w) = pool.windows(2).find(|w| w[0].patient_id == w[1].patient_id) {
            return Err(Error::validation(format!(
                "duplicate patient {}",
                w[0].patient_id
            )));
        }
        if pool.len() < n_per_class {
            return Err(Error::Capacity {
                class: label,
                need: n_per_class,
                have: pool.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), n_per_class).into_vec();
        picked.sort_unstable();
        patients.extend(picked.into_iter().map(|i| pool[i].clone()));
    }
    Ok(LabeledCohort {
        patients,
        sampling_seed: Some(seed),
    })
}

pub fn write_cohort(cohort: &LabeledCohort, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{COHORT_HEADER}").map_err(io)?;
    for p in &cohort.patients {
        writeln!(out, "{},{},{}", p.patient_id, p.index_day, p.label).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_cohort(path: impl AsRef<Path>) -> Result<LabeledCohort> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut patients = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 && line == COHORT_HEADER {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 || f[0].is_empty() {
            return Err(parse_err(format!("expected 3 fields, found {}", f.len())));
        }
        let index_day = f[1]
            .parse()
            .map_err(|_| parse_err(format!("bad index_day {:?}", f[1])))?;
        let label = f[2].parse().map_err(parse_err)?;
        patients.push(LabeledPatient {
            patient_id: f[0].to_string(),
            index_day,
            label,
        });
    }
    Ok(LabeledCohort {
        patients,
        sampling_seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(pid: &str, kind: EventKind, day: u32) -> EventRecord {
        EventRecord::new(pid, kind, "X1", day).unwrap()
    }

    fn with_failures(days: &[u32]) -> PatientTimeline {
        let mut events: Vec<_> = days.iter().map(|&d| ev("p", EventKind::AedFailure, d)).collect();
        events.push(ev("p", EventKind::Diagnosis, 1));
        PatientTimeline::new("p", events).unwrap()
    }

    #[test]
    fn grouping() {
        let t = EventTable::new(vec![
            ev("p1", EventKind::Drug, 3),
            ev("p2", EventKind::Drug, 1),
            ev("p1", EventKind::Drug, 1),
            ev("p1", EventKind::Drug, 2),
            ev("p2", EventKind::Drug, 0),
        ]);
        let tl = build_timelines(&t);
        assert_eq!(tl.len(), 2);
        assert_eq!(tl[0].events().len(), 3);
        assert_eq!(tl[1].events().len(), 2);
        let days: Vec<u32> = tl[0].events().iter().map(|e| e.day).collect();
        assert_eq!(days, vec![1, 2, 3]);
        assert!(build_timelines(&EventTable::default()).is_empty());
    }

    #[test]
    fn labeling_rules() {
        let c = label_patient(&with_failures(&[10])).unwrap();
        assert_eq!((c.label, c.index_day), (CohortLabel::Control, 10));
        let c = label_patient(&with_failures(&[10, 20, 30, 40, 50])).unwrap();
        assert_eq!((c.label, c.index_day), (CohortLabel::Case, 10));
        assert!(label_patient(&with_failures(&[10, 20])).is_none());
        assert!(label_patient(&with_failures(&[])).is_none());
        // Repeat failures on the index day are not future failures.
        assert!(label_patient(&with_failures(&[10, 10])).is_none());
        assert!(label_patient(&with_failures(&[10, 10, 20, 30, 40])).is_none());
    }

    #[test]
    fn strict_pre_index_cut() {
        let tl = PatientTimeline::new(
            "p",
            vec![
                ev("p", EventKind::Drug, 1),
                ev("p", EventKind::Drug, 5),
                ev("p", EventKind::AedFailure, 10),
                ev("p", EventKind::Drug, 10),
                ev("p", EventKind::Drug, 12),
            ],
        )
        .unwrap();
        let days: Vec<u32> = pre_index_events(&tl, 10).iter().map(|e| e.day).collect();
        assert_eq!(days, vec![1, 5]);
        assert!(pre_index_events(&tl, 1).is_empty());
        assert_eq!(pre_index_events(&tl, 100).len(), 5);
    }

    fn pool(n_case: usize, n_control: usize) -> Vec<LabeledPatient> {
        (0..n_case)
            .map(|i| (format!("c{i}"), CohortLabel::Case))
            .chain((0..n_control).map(|i| (format!("k{i}"), CohortLabel::Control)))
            .map(|(patient_id, label)| LabeledPatient {
                patient_id,
                index_day: 5,
                label,
            })
            .collect()
    }

    #[test]
    fn exhaustive_sample() {
        let c = sample_cohort(&pool(5, 5), 5, 0).unwrap();
        assert_eq!(c.patients.len(), 10);
        assert!(c.patients[..5].iter().all(|p| p.label == CohortLabel::Case));
        assert!(c.patients[..5].windows(2).all(|w| w[0].patient_id < w[1].patient_id));
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = pool(9, 7);
        assert_eq!(sample_cohort(&p, 3, 1).unwrap(), sample_cohort(&p, 3, 1).unwrap());
        let mut rev = p.clone();
        rev.reverse();
        assert_eq!(sample_cohort(&p, 3, 1).unwrap(), sample_cohort(&rev, 3, 1).unwrap());
    }

    #[test]
    fn capacity_error_message() {
        let err = sample_cohort(&pool(2, 5), 3, 0).unwrap_err();
        assert_eq!(err.to_string(), "CASE: need 3, have 2");
    }

    #[test]
    fn cohort_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let c = sample_cohort(&pool(4, 4), 2, 9).unwrap();
        write_cohort(&c, &p).unwrap();
        let back = read_cohort(&p).unwrap();
        assert_eq!(back.patients, c.patients);
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("patient_id,index_day,label\n"));
    }
}
