//! Incident statistics and transcript summaries as plain text.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::transcript::{parse_jsonl, RecordKind, TranscriptRecord};

pub const REGIONS_CSV: &str = include_str!("../fixtures/ghana_2018_regions.csv");
pub const SECTORS_CSV: &str = include_str!("../fixtures/ghana_2018_sectors.csv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("malformed incident CSV: {0}")]
    Csv(String),
    #[error("incident record {0}: category must be non-empty")]
    EmptyCategory(usize),
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("malformed transcript at line {line}: {message}")]
    MalformedTranscript { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub category: String,
    pub count: u64,
}

impl IncidentRecord {
    pub fn new(category: impl Into<String>, count: u64) -> Self {
        IncidentRecord { category: category.into(), count }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IncidentSummary {
    pub total: u64,
    pub max: Option<IncidentRecord>,
    pub min: Option<IncidentRecord>,
    /// Count descending, ties by category ascending.
    pub ranked: Vec<IncidentRecord>,
}

pub fn aggregate(records: &[IncidentRecord]) -> Result<IncidentSummary, ReportError> {
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        if r.category.is_empty() {
            return Err(ReportError::EmptyCategory(i + 1));
        }
        if !seen.insert(r.category.as_str()) {
            return Err(ReportError::DuplicateCategory(r.category.clone()));
        }
    }
    let mut ranked = records.to_vec();
    ranked.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.category.cmp(&b.category)));
    // The lowest count with the alphabetically first name among ties.
    let min = ranked
        .iter()
        .min_by(|a, b| a.count.cmp(&b.count).then_with(|| a.category.cmp(&b.category)))
        .cloned();
    Ok(IncidentSummary {
        total: records.iter().map(|r| r.count).sum(),
        max: ranked.first().cloned(),
        min,
        ranked,
    })
}

/// Reads a `category,count` CSV.
pub fn parse_incidents(text: &str) -> Result<Vec<IncidentRecord>, ReportError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| ReportError::Csv(e.to_string()))?;
    if headers != vec!["category", "count"] {
        return Err(ReportError::Csv(format!(
            "expected header `category,count`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| ReportError::Csv(e.to_string())))
        .collect()
}

pub fn bundled_regions() -> Vec<IncidentRecord> {
    parse_incidents(REGIONS_CSV).expect("bundled regions fixture parses")
}

pub fn bundled_sectors() -> Vec<IncidentRecord> {
    parse_incidents(SECTORS_CSV).expect("bundled sectors fixture parses")
}

pub fn render_incidents(summary: &IncidentSummary) -> String {
    let mut out = String::new();
    for r in &summary.ranked {
        let _ = writeln!(out, "{} {}", r.category, r.count);
    }
    let _ = writeln!(out, "total {}", summary.total);
    if let (Some(max), Some(min)) = (&summary.max, &summary.min) {
        let _ = writeln!(out, "max {} {}", max.category, max.count);
        let _ = writeln!(out, "min {} {}", min.category, min.count);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TranscriptSummary {
    pub detections: u64,
    pub sms_sent: u64,
    pub calls_placed: u64,
    pub failures: u64,
    /// From the first confirmed smoke edge to the first loss of load power.
    pub time_to_cutoff: Option<u64>,
    /// From the first confirmed smoke edge to the first delivered SMS.
    pub time_to_first_sms: Option<u64>,
}

pub fn summarize_records(records: &[TranscriptRecord]) -> TranscriptSummary {
    let mut s = TranscriptSummary::default();
    let mut detected_at = None;
    let mut cutoff_at = None;
    let mut first_sms_at = None;
    for r in records {
        match r.kind {
            RecordKind::SensorEdge if r.str_field("output") == Some("HIGH") => {
                s.detections += 1;
                detected_at.get_or_insert(r.t);
            }
            RecordKind::PowerChange if r.bool_field("loads_powered") == Some(false) => {
                if detected_at.is_some() {
                    cutoff_at.get_or_insert(r.t);
                }
            }
            RecordKind::SmsDelivered => {
                s.sms_sent += 1;
                first_sms_at.get_or_insert(r.t);
            }
            RecordKind::CallPlaced => s.calls_placed += 1,
            RecordKind::NotificationFailed => s.failures += 1,
            _ => {}
        }
    }
    if let Some(d) = detected_at {
        s.time_to_cutoff = cutoff_at.map(|t| t.saturating_sub(d));
        s.time_to_first_sms = first_sms_at.map(|t| t.saturating_sub(d));
    }
    s
}

pub fn summarize_transcript(text: &str) -> Result<TranscriptSummary, ReportError> {
    let records = parse_jsonl(text)
        .map_err(|(line, message)| ReportError::MalformedTranscript { line, message })?;
    Ok(summarize_records(&records))
}

pub fn render_transcript_summary(s: &TranscriptSummary) -> String {
    let ms = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    format!(
        "detections {}\nsms_sent {}\ncalls_placed {}\nfailures {}\ntime_to_cutoff_ms {}\ntime_to_first_sms_ms {}\n",
        s.detections,
        s.sms_sent,
        s.calls_placed,
        s.failures,
        ms(s.time_to_cutoff),
        ms(s.time_to_first_sms),
    )
}
