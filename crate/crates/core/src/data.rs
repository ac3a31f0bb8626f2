//! Patient event records with their CSV format.
//!
//! Also holds the synthetic event generator.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

pub const EVENT_HEADER: &str = "patient_id,event_kind,code,day";

/// Event category. Variants are declared in the lexicographic order of their
/// tags so the derived `Ord` matches string ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    AedFailure,
    Diagnosis,
    Drug,
    Procedure,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::AedFailure,
        EventKind::Diagnosis,
        EventKind::Drug,
        EventKind::Procedure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::AedFailure => "AED_FAILURE",
            EventKind::Diagnosis => "DIAGNOSIS",
            EventKind::Drug => "DRUG",
            EventKind::Procedure => "PROCEDURE",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// One timestamped patient event. `day` is an offset in days from the start
/// of the patient's record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub patient_id: String,
    pub kind: EventKind,
    pub code: String,
    pub day: u32,
}

impl EventRecord {
    pub fn new(
        patient_id: impl Into<String>,
        kind: EventKind,
        code: impl Into<String>,
        day: u32,
    ) -> Result<Self> {
        let rec = EventRecord {
            patient_id: patient_id.into(),
            kind,
            code: code.into(),
            day,
        };
        check_identifier("patient_id", &rec.patient_id).map_err(Error::Validation)?;
        check_identifier("code", &rec.code).map_err(Error::Validation)?;
        Ok(rec)
    }

    fn sort_key(&self) -> (&str, u32, EventKind, &str) {
        (&self.patient_id, self.day, self.kind, &self.code)
    }
}

fn check_identifier(field: &str, value: &str) -> std::result::Result<(), String> {
    if value.is_empty() {
        return Err(format!("{field} is empty"));
    }
    if value.contains([',', '\n', '\r']) {
        return Err(format!("{field} {value:?} contains a separator character"));
    }
    Ok(())
}

/// Events ordered by (patient_id, day, event_kind, code).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTable {
    records: Vec<EventRecord>,
}

impl EventTable {
    pub fn new(mut records: Vec<EventRecord>) -> Self {
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        EventTable { records }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<EventRecord> {
        self.records
    }

    /// Distinct patient ids, sorted.
    pub fn patient_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.patient_id.as_str()).collect();
        ids.dedup();
        ids
    }
}

/// Reads an event CSV. A leading header line is skipped when present; a
/// zero-byte file is an empty table.
pub fn read_events(path: impl AsRef<Path>) -> Result<EventTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if lineno == 1 && line == EVENT_HEADER {
            continue;
        }
        let rec = parse_event_line(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        })?;
        records.push(rec);
    }
    Ok(EventTable::new(records))
}

fn parse_event_line(line: &str) -> std::result::Result<EventRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let kind: EventKind = fields[1].parse()?;
    let day: u32 = fields[3]
        .parse()
        .map_err(|_| format!("day {:?} is not a non-negative integer", fields[3]))?;
    check_identifier("patient_id", fields[0])?;
    check_identifier("code", fields[2])?;
    Ok(EventRecord {
        patient_id: fields[0].to_string(),
        kind,
        code: fields[2].to_string(),
        day,
    })
}

pub fn write_events(table: &EventTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{EVENT_HEADER}").map_err(io)?;
    for r in &table.records {
        writeln!(out, "{},{},{},{}", r.patient_id, r.kind, r.code, r.day).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Upper bound on the per-code difference of class mean pre-index counts
/// produced by [`generate_events`] at the default scale (200 patients per
/// class). The planted signal lives in the spread of the signal codes, not
/// in their means.
pub const SIGNAL_MEAN_GAP_TOLERANCE: f64 = 0.75;

/// Settings for the synthetic event generator.
///
/// Each patient draws a latent direction `u` uniformly on the unit sphere in
/// `n_signal_codes` dimensions and a radius from its class's shells; the
/// pre-index count of signal code `j` is `max(0, round(signal_offset + radius * u_j))`.
/// Classes differ only in radius, so the planted structure is a set of
/// concentric shells around a common center. With `shell_mirror = Some(m)`
/// each class also owns an outer shell at `m - r`, which interleaves the
/// classes radially (control, case, case, control with the defaults) so no
/// single radius threshold separates them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub n_case: usize,
    pub n_control: usize,
    pub n_codes: usize,
    pub n_signal_codes: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian jitter added to each radius.
    pub noise_scale: f64,
    /// (control, case) inner shell radii.
    pub shell_radii: (f64, f64),
    pub shell_mirror: Option<f64>,
    /// Common center of the signal-code counts.
    pub signal_offset: f64,
    /// Poisson rate of each non-signal code in the pre-index window.
    pub background_rate: f64,
    /// Mean number of post-index noise events per patient.
    pub post_index_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_case: 200,
            n_control: 200,
            n_codes: 500,
            n_signal_codes: 20,
            seed: 0,
            noise_scale: 0.25,
            shell_radii: (3.0, 5.0),
            shell_mirror: Some(14.0),
            signal_offset: 7.0,
            background_rate: 0.05,
            post_index_rate: 10.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n_case == 0 || self.n_control == 0 {
            return bad("n_case and n_control must be positive".into());
        }
        if self.n_codes == 0 || self.n_signal_codes == 0 {
            return bad("n_codes and n_signal_codes must be positive".into());
        }
        if self.n_signal_codes > self.n_codes {
            return bad(format!(
                "n_signal_codes ({}) exceeds n_codes ({})",
                self.n_signal_codes, self.n_codes
            ));
        }
        if self.n_codes > 9999 || self.n_case + self.n_control > 99_999 {
            return bad("code or patient count exceeds identifier width".into());
        }
        let (rc, rk) = self.shell_radii;
        if !(rc > 0.0 && rk > 0.0) || !rc.is_finite() || !rk.is_finite() {
            return bad("shell radii must be positive".into());
        }
        if rc == rk {
            return bad("shell radii must be distinct".into());
        }
        if let Some(m) = self.shell_mirror {
            if !(m.is_finite() && m > 2.0 * rc.max(rk)) {
                return bad(format!(
                    "shell_mirror {m} must exceed twice the largest inner radius"
                ));
            }
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("signal_offset", self.signal_offset),
            ("background_rate", self.background_rate),
            ("post_index_rate", self.post_index_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        Ok(())
    }

    fn radii_for(&self, case: bool) -> Vec<f64> {
        let inner = if case { self.shell_radii.1 } else { self.shell_radii.0 };
        match self.shell_mirror {
            Some(m) => vec![inner, m - inner],
            None => vec![inner],
        }
    }
}

/// Kind and code of generator code index `j`. Signal codes are diagnoses.
pub fn generated_code(j: usize, n_signal_codes: usize) -> (EventKind, String) {
    let kind = if j < n_signal_codes {
        EventKind::Diagnosis
    } else {
        match (j - n_signal_codes) % 3 {
            0 => EventKind::Diagnosis,
            1 => EventKind::Drug,
            _ => EventKind::Procedure,
        }
    };
    let prefix = match kind {
        EventKind::Diagnosis => 'D',
        EventKind::Drug => 'R',
        EventKind::Procedure => 'P',
        EventKind::AedFailure => 'F',
    };
    (kind, format!("{prefix}{j:04}"))
}

const AED_CODES: usize = 12;

/// Generates a synthetic event table.
///
/// Every case patient has one first AED failure followed by 4 to 7 later
/// failures; every control has exactly one. The first failure falls in the
/// middle third of the patient's timeline, and all feature-bearing events of
/// the planted signal precede it. Generation is single-threaded and fully
/// determined by the config.
pub fn generate_events(config: &GeneratorConfig) -> Result<EventTable> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_case + config.n_control;

    let mut is_case: Vec<bool> = (0..n).map(|i| i < config.n_case).collect();
    is_case.shuffle(&mut rng);

    let codes: Vec<(EventKind, String)> = (0..config.n_codes)
        .map(|j| generated_code(j, config.n_signal_codes))
        .collect();
    let background = (config.background_rate > 0.0)
        .then(|| Poisson::new(config.background_rate).expect("validated rate"));
    let post_index = (config.post_index_rate > 0.0)
        .then(|| Poisson::new(config.post_index_rate).expect("validated rate"));

    let mut records = Vec::new();
    let mut latent = vec![0.0; config.n_signal_codes];
    for (p, &case) in is_case.iter().enumerate() {
        let pid = format!("P{p:05}");
        let horizon: u32 = rng.random_range(600..=1200);
        let index_day: u32 = rng.random_range(horizon / 3..2 * horizon / 3);
        let mut push = |kind: EventKind, code: &str, day: u32| {
            records.push(EventRecord {
                patient_id: pid.clone(),
                kind,
                code: code.to_string(),
                day,
            });
        };

        // Planted shell signal on the signal codes.
        let radii = config.radii_for(case);
        let radius = radii[rng.random_range(0..radii.len())]
            + config.noise_scale * rng.sample::<f64, _>(StandardNormal);
        let mut norm: f64 = 0.0;
        for g in latent.iter_mut() {
            *g = rng.sample(StandardNormal);
            norm += *g * *g;
        }
        let norm = norm.sqrt().max(f64::MIN_POSITIVE);
        for (j, (kind, code)) in codes.iter().enumerate() {
            let count = if j < config.n_signal_codes {
                (config.signal_offset + radius * latent[j] / norm).round().max(0.0) as u64
            } else {
                background.as_ref().map_or(0, |d| d.sample(&mut rng) as u64)
            };
            for _ in 0..count {
                let day = rng.random_range(0..index_day);
                push(*kind, code, day);
            }
        }

        // AED failures: the first one defines the index date.
        push(EventKind::AedFailure, &aed_code(&mut rng), index_day);
        if case {
            let extra = rng.random_range(4..=7);
            for _ in 0..extra {
                let day = rng.random_range(index_day + 1..=horizon);
                push(EventKind::AedFailure, &aed_code(&mut rng), day);
            }
        }

        // Post-index noise, identical in distribution for both classes.
        let n_post = post_index.as_ref().map_or(0, |d| d.sample(&mut rng) as u64);
        for _ in 0..n_post {
            let (kind, code) = &codes[rng.random_range(0..codes.len())];
            let day = rng.random_range(index_day..=horizon);
            push(*kind, code, day);
        }
    }
    Ok(EventTable::new(records))
}

fn aed_code(rng: &mut ChaCha8Rng) -> String {
    format!("F{:02}", rng.random_range(0..AED_CODES))
}
