//! Per-patient count vectors over pre-index events, stacked row-wise into a
//! feature matrix.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::cohort::{pre_index_events, CohortLabel, LabeledCohort, PatientTimeline};
use crate::data::{EventKind, EventRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureKey {
    pub kind: EventKind,
    pub code: String,
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.code)
    }
}

impl std::str::FromStr for FeatureKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, code) = s
            .split_once(':')
            .ok_or_else(|| format!("feature column {s:?} is not KIND:code"))?;
        Ok(FeatureKey {
            kind: kind.parse()?,
            code: code.to_string(),
        })
    }
}

/// Sorted, de-duplicated feature keys; a key's position is its column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVocabulary {
    keys: Vec<FeatureKey>,
}

impl FeatureVocabulary {
    pub fn from_keys(mut keys: Vec<FeatureKey>) -> Self {
        keys.sort();
        keys.dedup();
        FeatureVocabulary { keys }
    }

    pub fn keys(&self) -> &[FeatureKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn column_of(&self, kind: EventKind, code: &str) -> Option<usize> {
        self.keys
            .binary_search_by(|k| k.kind.cmp(&kind).then_with(|| k.code.as_str().cmp(code)))
            .ok()
    }

    pub fn names(&self) -> Vec<String> {
        self.keys.iter().map(ToString::to_string).collect()
    }
}

/// Distinct (kind, code) pairs among the given events.
pub fn build_vocabulary<'a, I>(events: I) -> FeatureVocabulary
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    FeatureVocabulary::from_keys(
        events
            .into_iter()
            .map(|e| FeatureKey {
                kind: e.kind,
                code: e.code.clone(),
            })
            .collect(),
    )
}

/// Vocabulary over the strictly-pre-index events of every cohort patient.
pub fn cohort_vocabulary(cohort: &LabeledCohort, timelines: &[PatientTimeline]) -> Result<FeatureVocabulary> {
    let mut keys = Vec::new();
    for p in &cohort.patients {
        let tl = find_timeline(timelines, &p.patient_id)?;
        keys.extend(pre_index_events(tl, p.index_day).iter().map(|e| FeatureKey {
            kind: e.kind,
            code: e.code.clone(),
        }));
    }
    Ok(FeatureVocabulary::from_keys(keys))
}

fn find_timeline<'a>(timelines: &'a [PatientTimeline], pid: &str) -> Result<&'a PatientTimeline> {
    // Timelines from `build_timelines` are sorted by id; fall back to a scan otherwise.
    match timelines.binary_search_by(|t| t.patient_id.as_str().cmp(pid)) {
        Ok(i) => Ok(&timelines[i]),
        Err(_) => timelines
            .iter()
            .find(|t| t.patient_id == pid)
            .ok_or_else(|| Error::MissingPatient(pid.to_string())),
    }
}

/// Patients × features matrix of non-negative event counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    vocabulary: FeatureVocabulary,
    values: Array2<u32>,
    labels: Option<Vec<CohortLabel>>,
}

impl FeatureMatrix {
    pub fn new(
        row_ids: Vec<String>,
        vocabulary: FeatureVocabulary,
        values: Array2<u32>,
        labels: Option<Vec<CohortLabel>>,
    ) -> Result<Self> {
        if values.nrows() != row_ids.len() {
            return Err(Error::Dimension {
                expected: row_ids.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() != vocabulary.len() {
            return Err(Error::Dimension {
                expected: vocabulary.len(),
                got: values.ncols(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != row_ids.len() {
                return Err(Error::Dimension {
                    expected: row_ids.len(),
                    got: l.len(),
                });
            }
        }
        let mut sorted: Vec<&String> = row_ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("duplicate row id {}", w[0])));
        }
        Ok(FeatureMatrix {
            row_ids,
            vocabulary,
            values,
            labels,
        })
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn vocabulary(&self) -> &FeatureVocabulary {
        &self.vocabulary
    }

    pub fn values(&self) -> &Array2<u32> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[CohortLabel]> {
        self.labels.as_deref()
    }

    /// Labels as CASE = true.
    pub fn case_mask(&self) -> Option<Vec<bool>> {
        self.labels
            .as_ref()
            .map(|l| l.iter().map(|x| x.is_case()).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(f64::from)
    }

    /// Non-zero `(column, count)` pairs of row `i`.
    pub fn row_nonzeros(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.values
            .row(i)
            .into_iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(j, &v)| (j, v))
            .collect::<Vec<_>>()
            .into_iter()
    }
}

/// Counts each vocabulary key among every cohort patient's pre-index events.
///
/// Rows follow cohort order; keys missing from the vocabulary are ignored.
pub fn featurize(
    cohort: &LabeledCohort,
    timelines: &[PatientTimeline],
    vocabulary: &FeatureVocabulary,
) -> Result<FeatureMatrix> {
    let found: Vec<&PatientTimeline> = cohort
        .patients
        .iter()
        .map(|p| find_timeline(timelines, &p.patient_id))
        .collect::<Result<_>>()?;
    let rows = crate::par::map_range(cohort.patients.len(), |i| {
        let mut row = vec![0u32; vocabulary.len()];
        for e in pre_index_events(found[i], cohort.patients[i].index_day) {
            if let Some(j) = vocabulary.column_of(e.kind, &e.code) {
                row[j] += 1;
            }
        }
        row
    });
    let n_features = vocabulary.len();
    let values = Array2::from_shape_vec(
        (rows.len(), n_features),
        rows.into_iter().flatten().collect(),
    )
    .expect("row lengths match vocabulary");
    FeatureMatrix::new(
        cohort.patients.iter().map(|p| p.patient_id.clone()).collect(),
        vocabulary.clone(),
        values,
        Some(cohort.labels()),
    )
}

pub fn write_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = String::from("patient_id");
    if m.labels.is_some() {
        header.push_str(",label");
    }
    for k in m.vocabulary.keys() {
        header.push(',');
        header.push_str(&k.to_string());
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for (i, id) in m.row_ids.iter().enumerate() {
        line.clear();
        line.push_str(id);
        if let Some(l) = &m.labels {
            line.push(',');
            line.push_str(l[i].as_str());
        }
        for v in m.values.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"patient_id") {
        return Err(parse_err(1, "first column must be patient_id".into()));
    }
    let has_label = cols.get(1) == Some(&"label");
    let skip = if has_label { 2 } else { 1 };
    let keys: Vec<FeatureKey> = cols[skip..]
        .iter()
        .map(|c| c.parse().map_err(|m| parse_err(1, m)))
        .collect::<Result<_>>()?;
    let vocabulary = FeatureVocabulary { keys };
    let mut sorted = vocabulary.keys.clone();
    sorted.sort();
    sorted.dedup();
    if sorted != vocabulary.keys {
        return Err(parse_err(1, "feature columns are not sorted and unique".into()));
    }

    let mut row_ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", cols.len(), f.len()),
            ));
        }
        row_ids.push(f[0].to_string());
        if has_label {
            labels.push(f[1].parse().map_err(|m| parse_err(lineno, m))?);
        }
        for cell in &f[skip..] {
            values.push(
                cell.parse::<u32>()
                    .map_err(|_| parse_err(lineno, format!("bad count {cell:?}")))?,
            );
        }
    }
    let values = Array2::from_shape_vec((row_ids.len(), vocabulary.len()), values)
        .expect("row arity checked");
    FeatureMatrix::new(row_ids, vocabulary, values, has_label.then_some(labels))
}
