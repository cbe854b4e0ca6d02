//! Transcript records and their JSON Lines form.
//!
//! Every record serializes as one line with lexicographically sorted keys
//! (`kind`, `payload`, `seq`, `t`) and integer, boolean or string values
//! only, so two runs can be compared byte for byte.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    StateChange,
    Action,
    SmsDelivered,
    CallPlaced,
    NotificationFailed,
    SensorEdge,
    PowerChange,
}

impl RecordKind {
    pub fn name(&self) -> &'static str {
        match self {
            RecordKind::StateChange => "STATE_CHANGE",
            RecordKind::Action => "ACTION",
            RecordKind::SmsDelivered => "SMS_DELIVERED",
            RecordKind::CallPlaced => "CALL_PLACED",
            RecordKind::NotificationFailed => "NOTIFICATION_FAILED",
            RecordKind::SensorEdge => "SENSOR_EDGE",
            RecordKind::PowerChange => "POWER_CHANGE",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// Field order here is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub kind: RecordKind,
    pub payload: Map<String, Value>,
    pub seq: u64,
    pub t: u64,
}

impl TranscriptRecord {
    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn u64_field(&self, key: &str) -> Option<u64> {
        self.payload.get(key).and_then(Value::as_u64)
    }

    pub fn bool_field(&self, key: &str) -> Option<bool> {
        self.payload.get(key).and_then(Value::as_bool)
    }

    pub fn to_json_line(&self) -> String {
        // Map is a BTreeMap, so nested keys come out sorted too.
        serde_json::to_string(self).expect("transcript records always serialize")
    }
}

pub fn to_jsonl(records: &[TranscriptRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

pub fn write_jsonl(mut w: impl Write, records: &[TranscriptRecord]) -> io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    w.flush()
}

/// Parses a JSON Lines transcript. On failure returns the 1-based line
/// number and a description.
pub fn parse_jsonl(text: &str) -> Result<Vec<TranscriptRecord>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted() {
        let Value::Object(payload) = json!({"phase": "NORMAL", "cause": "INIT"}) else {
            unreachable!()
        };
        let r = TranscriptRecord { kind: RecordKind::StateChange, payload, seq: 0, t: 0 };
        assert_eq!(
            r.to_json_line(),
            r#"{"kind":"STATE_CHANGE","payload":{"cause":"INIT","phase":"NORMAL"},"seq":0,"t":0}"#
        );
        let back = parse_jsonl(&to_jsonl(std::slice::from_ref(&r))).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn bad_lines_are_located() {
        let text = "{\"kind\":\"ACTION\",\"payload\":{},\"seq\":0,\"t\":0}\nnot json\n";
        assert_eq!(parse_jsonl(text).unwrap_err().0, 2);
    }
}
