//! JSONL persistence.
//!
//! Study lines look like
//!
//! ```json
//! {"schema_version":1,"study_id":"study-000001","findings_text":"...",
//!  "labels":{"Atelectasis":0.0,...},"observation":{"Atelectasis":"negative",...},"split":"train"}
//! ```
//!
//! `labels` takes all fourteen canonical names with `1.0`, `0.0`, `-1.0` or
//! `null` (blank, read as negative). `observation` and `split` are optional:
//! a missing observation is derived from the labels, a missing split from a
//! hash of the study id. Any other field is kept and written back unchanged.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rrg_core::corpus::{assign_split, Split, StudyRecord};
use rrg_core::labels::{LabelVector, Pathology, CATEGORY_COUNT};
use rrg_core::policy::{Evidence, Observation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Seed and fractions for studies whose line carries no split.
pub const DEFAULT_SPLIT_SEED: u64 = 0;
pub const DEFAULT_SPLIT_FRACTIONS: [f64; 2] = [0.8, 0.1];

/// Reads one JSON value per non-blank line. Every malformed line is reported.
pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => rows.push((i + 1, v)),
            Err(e) => problems.push(format!("line {}: {e}", i + 1)),
        }
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::data(format!("{}: malformed lines", path.display()), problems))
    }
}

pub fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| CliError::data(format!("{}: {e}", path.display()), Vec::new()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudyLine {
    schema_version: u32,
    study_id: String,
    findings_text: String,
    labels: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<BTreeMap<String, Evidence>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

impl From<&StudyRecord> for StudyLine {
    fn from(r: &StudyRecord) -> Self {
        StudyLine {
            schema_version: SCHEMA_VERSION,
            study_id: r.study_id.clone(),
            findings_text: r.findings_text.clone(),
            labels: r.labels.to_json_map(),
            observation: r.observation.map(|o| Pathology::ALL.iter().map(|c| (c.name().to_string(), o.get(*c))).collect()),
            split: Some(r.split),
            extra: r.extra.clone(),
        }
    }
}

fn line_to_record(line: StudyLine) -> Result<StudyRecord, Vec<String>> {
    let mut problems = Vec::new();
    if line.schema_version != SCHEMA_VERSION {
        problems.push(format!("schema_version {} is not {SCHEMA_VERSION}", line.schema_version));
    }
    if line.findings_text.trim().is_empty() {
        problems.push("findings_text is empty".into());
    }
    let labels = match LabelVector::from_ground_truth_json(&line.labels) {
        Ok(l) => Some(l),
        Err(report) => {
            problems.push(format!("labels: {report}"));
            None
        }
    };
    let observation = match line.observation {
        None => None,
        Some(map) => {
            let mut symbols: [Option<Evidence>; CATEGORY_COUNT] = [None; CATEGORY_COUNT];
            for (name, e) in map {
                match Pathology::from_name(&name) {
                    Some(c) => symbols[c.index()] = Some(e),
                    None => problems.push(format!("observation: unknown category \"{name}\"")),
                }
            }
            let missing: Vec<&str> =
                Pathology::ALL.iter().filter(|c| symbols[c.index()].is_none()).map(|c| c.name()).collect();
            if !missing.is_empty() {
                problems.push(format!("observation: missing {}", missing.join(", ")));
            }
            Some(Observation(symbols.map(|s| s.unwrap_or(Evidence::Ambiguous))))
        }
    };
    match (problems.is_empty(), labels) {
        (true, Some(labels)) => Ok(StudyRecord {
            split: line
                .split
                .unwrap_or_else(|| assign_split(DEFAULT_SPLIT_SEED, &line.study_id, DEFAULT_SPLIT_FRACTIONS)),
            study_id: line.study_id,
            findings_text: line.findings_text,
            labels,
            observation,
            extra: line.extra,
        }),
        _ => Err(problems),
    }
}

/// Reads a study corpus. An empty file is an empty corpus.
pub fn read_studies(path: &Path) -> Result<Vec<StudyRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut records = Vec::new();
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: StudyLine = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                problems.push(format!("line {n}: {e}"));
                continue;
            }
        };
        if !seen.insert(parsed.study_id.clone()) {
            problems.push(format!("line {n}: duplicate study_id \"{}\"", parsed.study_id));
        }
        match line_to_record(parsed) {
            Ok(r) => records.push(r),
            Err(p) => problems.extend(p.into_iter().map(|m| format!("line {n}: {m}"))),
        }
    }
    if problems.is_empty() {
        Ok(records)
    } else {
        Err(CliError::data(format!("{}: invalid study lines", path.display()), problems))
    }
}

pub fn write_studies(path: &Path, records: &[StudyRecord]) -> Result<(), CliError> {
    write_lines(path, records.iter().map(StudyLine::from))
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string(), Vec::new()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display()), Vec::new()))
}
