//! Scenario files: `{name, horizon_ms, events: [{at_ms, kind, ...params}]}`.
//!
//! Event kinds and their parameters:
//!
//! | kind            | parameters                                   |
//! |-----------------|----------------------------------------------|
//! | `SET_SMOKE`     | `level` in [0, 1]                            |
//! | `PRESS_RESET`   |                                              |
//! | `PRESS_RESTORE` |                                              |
//! | `MAINS_FAIL`    |                                              |
//! | `MAINS_RESTORE` |                                              |
//! | `BACKUP_FAIL`   |                                              |
//! | `MODEM_FAULT`   | `behavior`, optional `on`, `code`, `repeat`  |

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::gsm::modem::{BehaviorName, FaultBehavior, FaultRule, FaultSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario syntax error: {0}")]
    Syntax(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SetSmoke(f64),
    PressReset,
    PressRestore,
    MainsFail,
    MainsRestore,
    BackupFail,
    ModemFault(FaultSpec),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SetSmoke(_) => "SET_SMOKE",
            EventKind::PressReset => "PRESS_RESET",
            EventKind::PressRestore => "PRESS_RESTORE",
            EventKind::MainsFail => "MAINS_FAIL",
            EventKind::MainsRestore => "MAINS_RESTORE",
            EventKind::BackupFail => "BACKUP_FAIL",
            EventKind::ModemFault(_) => "MODEM_FAULT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub at: u64,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(at: u64, kind: EventKind) -> Self {
        ScenarioEvent { at, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Sorted by time; ties keep declaration order.
    pub events: Vec<ScenarioEvent>,
    pub horizon: u64,
}

impl Scenario {
    /// Builds a scenario, stably sorting the events by time.
    pub fn new(
        name: impl Into<String>,
        mut events: Vec<ScenarioEvent>,
        horizon: u64,
    ) -> Result<Self, ScenarioError> {
        events.sort_by_key(|e| e.at);
        let s = Scenario { name: name.into(), events, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(last) = self.events.last() {
            if last.at > self.horizon {
                return Err(ScenarioError::Invalid(format!(
                    "event at {} ms is past the horizon {} ms",
                    last.at, self.horizon
                )));
            }
        }
        if self.events.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(ScenarioError::Invalid("events are not sorted by time".into()));
        }
        for (i, e) in self.events.iter().enumerate() {
            match &e.kind {
                EventKind::SetSmoke(level) if !(0.0..=1.0).contains(level) => {
                    return Err(ScenarioError::Invalid(format!(
                        "events[{i}]: smoke level {level} outside [0, 1]"
                    )));
                }
                EventKind::ModemFault(spec) => {
                    spec.rules()
                        .map_err(|m| ScenarioError::Invalid(format!("events[{i}]: {m}")))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let events: Vec<Value> = self.events.iter().map(event_json).collect();
        json!({"name": self.name, "horizon_ms": self.horizon, "events": events}).to_string()
    }
}

fn event_json(e: &ScenarioEvent) -> Value {
    let mut m = Map::new();
    m.insert("at_ms".into(), json!(e.at));
    m.insert("kind".into(), json!(e.kind.name()));
    match &e.kind {
        EventKind::SetSmoke(level) => {
            m.insert("level".into(), json!(level));
        }
        EventKind::ModemFault(spec) => {
            if let Value::Object(fields) = json!(spec) {
                for (k, v) in fields {
                    if !v.is_null() {
                        m.insert(k, v);
                    }
                }
            }
        }
        _ => {}
    }
    Value::Object(m)
}

/// Convenience for building fault events in code.
pub fn fault_event(at: u64, rule: FaultRule, repeat: u32) -> ScenarioEvent {
    let (behavior, code) = match rule.behavior {
        FaultBehavior::ReplyError => (BehaviorName::ReplyError, None),
        FaultBehavior::CmsError(c) => (BehaviorName::CmsError, Some(c)),
        FaultBehavior::Drop => (BehaviorName::Drop, None),
    };
    ScenarioEvent::new(
        at,
        EventKind::ModemFault(FaultSpec { on: rule.on, behavior, code, repeat }),
    )
}

fn invalid(msg: String) -> ScenarioError {
    ScenarioError::Invalid(msg)
}

fn parse_event(i: usize, v: &Value) -> Result<ScenarioEvent, ScenarioError> {
    let obj = v
        .as_object()
        .ok_or_else(|| invalid(format!("events[{i}] is not an object")))?;
    let at = obj
        .get("at_ms")
        .and_then(Value::as_u64)
        .ok_or_else(|| invalid(format!("events[{i}].at_ms must be a non-negative integer")))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(format!("events[{i}].kind must be a string")))?;
    let params: Map<String, Value> = obj
        .iter()
        .filter(|(k, _)| *k != "at_ms" && *k != "kind")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let no_params = |kind: EventKind| {
        if let Some(k) = params.keys().next() {
            return Err(invalid(format!("events[{i}]: unknown field `{k}` for {}", kind.name())));
        }
        Ok(kind)
    };
    let kind = match kind {
        "SET_SMOKE" => {
            let level = params
                .get("level")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid(format!("events[{i}].level must be a number")))?;
            if let Some(k) = params.keys().find(|k| *k != "level") {
                return Err(invalid(format!("events[{i}]: unknown field `{k}` for SET_SMOKE")));
            }
            EventKind::SetSmoke(level)
        }
        "PRESS_RESET" => no_params(EventKind::PressReset)?,
        "PRESS_RESTORE" => no_params(EventKind::PressRestore)?,
        "MAINS_FAIL" => no_params(EventKind::MainsFail)?,
        "MAINS_RESTORE" => no_params(EventKind::MainsRestore)?,
        "BACKUP_FAIL" => no_params(EventKind::BackupFail)?,
        "MODEM_FAULT" => {
            let spec: FaultSpec = serde_json::from_value(Value::Object(params))
                .map_err(|e| invalid(format!("events[{i}]: {e}")))?;
            EventKind::ModemFault(spec)
        }
        other => return Err(invalid(format!("events[{i}]: unknown event kind `{other}`"))),
    };
    Ok(ScenarioEvent { at, kind })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| ScenarioError::Syntax("top level must be a JSON object".into()))?;
    if let Some(k) = obj.keys().find(|k| !["name", "horizon_ms", "events"].contains(&k.as_str())) {
        return Err(invalid(format!("unknown field `{k}`")));
    }
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("`name` must be a string".into()))?;
    let horizon = obj
        .get("horizon_ms")
        .and_then(Value::as_u64)
        .ok_or_else(|| invalid("`horizon_ms` must be a non-negative integer".into()))?;
    let events = match obj.get("events") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_event(i, v))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid("`events` must be an array".into())),
    };
    Scenario::new(name, events, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsm::modem::CommandKind;

    #[test]
    fn parses_and_sorts_stably() {
        let s = parse_scenario(
            r#"{"name":"x","horizon_ms":30000,"events":[
                {"at_ms":5000,"kind":"PRESS_RESET"},
                {"at_ms":0,"kind":"SET_SMOKE","level":0.9},
                {"at_ms":5000,"kind":"PRESS_RESTORE"}]}"#,
        )
        .unwrap();
        let kinds: Vec<_> = s.events.iter().map(|e| e.kind.name()).collect();
        assert_eq!(kinds, ["SET_SMOKE", "PRESS_RESET", "PRESS_RESTORE"]);
    }

    #[test]
    fn modem_fault_params() {
        let s = parse_scenario(
            r#"{"name":"f","horizon_ms":10,"events":[
                {"at_ms":0,"kind":"MODEM_FAULT","behavior":"cms_error","code":500,"repeat":2}]}"#,
        )
        .unwrap();
        let EventKind::ModemFault(spec) = &s.events[0].kind else { panic!() };
        assert_eq!(spec.on, CommandKind::SmsBody);
        assert_eq!(spec.rules().unwrap().len(), 2);
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let bad = [
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":20,"kind":"PRESS_RESET"}]}"#,
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":0,"kind":"SET_SMOKE","level":1.5}]}"#,
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":0,"kind":"EXPLODE"}]}"#,
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":0,"kind":"PRESS_RESET","x":1}]}"#,
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":-1,"kind":"PRESS_RESET"}]}"#,
            r#"{"name":"x","horizon_ms":10,"events":[{"at_ms":0,"kind":"MODEM_FAULT","behavior":"cms_error"}]}"#,
            r#"{"name":"x","horizon_ms":10,"extra":true}"#,
            r#"{"horizon_ms":10}"#,
        ];
        for doc in bad {
            assert!(matches!(parse_scenario(doc), Err(ScenarioError::Invalid(_))), "{doc}");
        }
        assert!(matches!(parse_scenario("{"), Err(ScenarioError::Syntax(_))));
    }

    #[test]
    fn empty_event_list_is_fine() {
        let s = parse_scenario(r#"{"name":"idle","horizon_ms":1000,"events":[]}"#).unwrap();
        assert!(s.events.is_empty());
    }
}
