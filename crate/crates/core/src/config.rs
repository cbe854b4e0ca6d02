//! Alarm configuration: phone book, detection thresholds, escalation timing,
//! notification templates and the input/relay channel map.
//!
//! Configuration documents are flat UTF-8 JSON objects. Unknown keys are
//! rejected, absent optional keys take the defaults below, and every accepted
//! [`Config`] satisfies [`Config::validate`]. [`serialize_config`] writes the
//! canonical form (sorted keys, no whitespace) and [`parse_config`] reads it
//! back to an identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::gsm::text::{check_sms_body, SMS_MAX_CHARS};

pub const DEFAULT_RESEND_DELAY_MS: u64 = 12_000;
pub const DEFAULT_CALL_DELAY_MS: u64 = 15_000;
pub const DEFAULT_DEBOUNCE_MS: u64 = 200;
pub const DEFAULT_SMOKE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_HYSTERESIS_RATIO: f64 = 0.8;
pub const DEFAULT_SMS_RETRY_LIMIT: u32 = 3;
pub const DEFAULT_SMS_RETRY_BACKOFF_MS: u64 = 2_000;
pub const DEFAULT_SITE_NAME: &str = "Protected facility";
pub const DEFAULT_INITIAL_TEMPLATE: &str =
    "FIRE ALARM at {site_name}: smoke detected at {time}, mains supply cut off. Reset the panel to stop escalation.";
pub const DEFAULT_REMINDER_TEMPLATE: &str =
    "FIRE ALARM not reset at {site_name}. Location: {location}. Active since {time}.";

pub const RESEND_DELAY_RANGE_MS: std::ops::RangeInclusive<u64> = 10_000..=15_000;
pub const MAX_DEBOUNCE_MS: u64 = 5_000;
pub const SMS_RETRY_LIMIT_RANGE: std::ops::RangeInclusive<u32> = 1..=5;

pub const INPUT_CHANNELS: std::ops::RangeInclusive<u8> = 1..=8;
pub const RELAYS: std::ops::RangeInclusive<u8> = 1..=2;

/// Placeholders a notification template may reference.
pub const PLACEHOLDERS: [&str; 3] = ["site_name", "location", "time"];

const PHONE_DIGITS: std::ops::RangeInclusive<usize> = 8..=15;

// Widest `{time}` rendering assumed when checking template length (< 100 h).
const TIME_WIDTH_PROBE: &str = "00:00:00.000";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path of the offending value, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax(_) => None,
            ConfigError::UnknownField(p) => Some(p),
            ConfigError::Validation { path, .. } => Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhoneError {
    #[error("phone number must start with `+`")]
    MissingPlus,
    #[error("phone number contains non-digit character {0:?}")]
    NonDigit(char),
    #[error("phone number has {0} digits, expected 8 to 15")]
    Length(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("missing placeholder `{0}`")]
    MissingPlaceholder(String),
}

/// International-format phone number: `+` followed by 8 to 15 digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub struct PhoneNumber(String);

impl PhoneNumber {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PhoneNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<PhoneNumber> for String {
    fn from(p: PhoneNumber) -> String {
        p.0
    }
}

impl FromStr for PhoneNumber {
    type Err = PhoneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_phone(s)
    }
}

impl<'de> Deserialize<'de> for PhoneNumber {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        validate_phone(&raw).map_err(serde::de::Error::custom)
    }
}

/// Normalizes `raw` (all whitespace removed) and checks the number format.
pub fn validate_phone(raw: &str) -> Result<PhoneNumber, PhoneError> {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let digits = compact.strip_prefix('+').ok_or(PhoneError::MissingPlus)?;
    if let Some(bad) = digits.chars().find(|c| !c.is_ascii_digit()) {
        return Err(PhoneError::NonDigit(bad));
    }
    if !PHONE_DIGITS.contains(&digits.len()) {
        return Err(PhoneError::Length(digits.len()));
    }
    Ok(PhoneNumber(compact))
}

/// Escalation timing. `call_delay` is measured from alarm onset, like
/// `resend_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingPlan {
    pub resend_delay: u64,
    pub call_delay: u64,
    pub debounce: u64,
}

impl Default for TimingPlan {
    fn default() -> Self {
        TimingPlan {
            resend_delay: DEFAULT_RESEND_DELAY_MS,
            call_delay: DEFAULT_CALL_DELAY_MS,
            debounce: DEFAULT_DEBOUNCE_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRole {
    Smoke,
    Reset,
    Restore,
    Unused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayRole {
    ContactorCoil,
    Unused,
}

/// Terminal name of a digital input channel; channel 1 is `D0`.
pub fn input_terminal(channel: u8) -> String {
    format!("D{}", channel.saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub site_name: String,
    /// Free-text location sent with the reminder wave.
    pub location: String,
    pub owner: PhoneNumber,
    pub fire_service: PhoneNumber,
    /// Normalized smoke level in (0, 1) above which the sensor trips.
    pub smoke_threshold: f64,
    pub hysteresis_ratio: f64,
    pub timing: TimingPlan,
    pub initial_template: String,
    pub reminder_template: String,
    pub input_map: BTreeMap<u8, InputRole>,
    pub relay_map: BTreeMap<u8, RelayRole>,
    pub sms_retry_limit: u32,
    pub sms_retry_backoff: u64,
}

fn default_input_map() -> BTreeMap<u8, InputRole> {
    INPUT_CHANNELS
        .map(|ch| {
            let role = match ch {
                1 => InputRole::Smoke,
                2 => InputRole::Reset,
                3 => InputRole::Restore,
                _ => InputRole::Unused,
            };
            (ch, role)
        })
        .collect()
}

fn default_relay_map() -> BTreeMap<u8, RelayRole> {
    RELAYS
        .map(|r| {
            let role = if r == 1 { RelayRole::ContactorCoil } else { RelayRole::Unused };
            (r, role)
        })
        .collect()
}

impl Config {
    /// Configuration with every optional field at its default.
    pub fn new(owner: PhoneNumber, fire_service: PhoneNumber, location: impl Into<String>) -> Self {
        Config {
            site_name: DEFAULT_SITE_NAME.to_string(),
            location: location.into(),
            owner,
            fire_service,
            smoke_threshold: DEFAULT_SMOKE_THRESHOLD,
            hysteresis_ratio: DEFAULT_HYSTERESIS_RATIO,
            timing: TimingPlan::default(),
            initial_template: DEFAULT_INITIAL_TEMPLATE.to_string(),
            reminder_template: DEFAULT_REMINDER_TEMPLATE.to_string(),
            input_map: default_input_map(),
            relay_map: default_relay_map(),
            sms_retry_limit: DEFAULT_SMS_RETRY_LIMIT,
            sms_retry_backoff: DEFAULT_SMS_RETRY_BACKOFF_MS,
        }
    }

    pub fn channel_for(&self, role: InputRole) -> Option<u8> {
        self.input_map
            .iter()
            .find(|(_, r)| **r == role)
            .map(|(ch, _)| *ch)
    }

    /// Level at or below which a tripped sensor releases.
    pub fn release_level(&self) -> f64 {
        self.smoke_threshold * self.hysteresis_ratio
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_text("site_name", &self.site_name)?;
        check_text("location", &self.location)?;

        if !(self.smoke_threshold > 0.0 && self.smoke_threshold < 1.0) {
            return Err(ConfigError::invalid(
                "smoke_threshold",
                format!("must be strictly between 0 and 1, got {}", self.smoke_threshold),
            ));
        }
        if !(self.hysteresis_ratio > 0.0 && self.hysteresis_ratio <= 1.0) {
            return Err(ConfigError::invalid(
                "hysteresis_ratio",
                format!("must be in (0, 1], got {}", self.hysteresis_ratio),
            ));
        }

        let t = &self.timing;
        if !RESEND_DELAY_RANGE_MS.contains(&t.resend_delay) {
            return Err(ConfigError::invalid(
                "timing.resend_delay",
                format!("must be within [10000, 15000] ms, got {}", t.resend_delay),
            ));
        }
        if t.call_delay < t.resend_delay {
            return Err(ConfigError::invalid(
                "timing.call_delay",
                format!(
                    "must not be shorter than resend_delay ({} ms), got {}",
                    t.resend_delay, t.call_delay
                ),
            ));
        }
        if t.debounce > MAX_DEBOUNCE_MS {
            return Err(ConfigError::invalid(
                "timing.debounce",
                format!("must be at most {MAX_DEBOUNCE_MS} ms, got {}", t.debounce),
            ));
        }

        self.check_template("initial_template", &self.initial_template)?;
        self.check_template("reminder_template", &self.reminder_template)?;

        for ch in self.input_map.keys() {
            if !INPUT_CHANNELS.contains(ch) {
                return Err(ConfigError::invalid(
                    format!("input_map.{ch}"),
                    "input channels are numbered 1 to 8",
                ));
            }
        }
        for role in [InputRole::Smoke, InputRole::Reset] {
            let n = self.input_map.values().filter(|r| **r == role).count();
            if n != 1 {
                return Err(ConfigError::invalid(
                    "input_map",
                    format!("exactly one channel must have role {role:?}, found {n}"),
                ));
            }
        }
        for r in self.relay_map.keys() {
            if !RELAYS.contains(r) {
                return Err(ConfigError::invalid(
                    format!("relay_map.{r}"),
                    "relays are numbered 1 and 2",
                ));
            }
        }
        let coils = self
            .relay_map
            .values()
            .filter(|r| **r == RelayRole::ContactorCoil)
            .count();
        if coils != 1 {
            return Err(ConfigError::invalid(
                "relay_map",
                format!("exactly one relay must drive the contactor coil, found {coils}"),
            ));
        }

        if !SMS_RETRY_LIMIT_RANGE.contains(&self.sms_retry_limit) {
            return Err(ConfigError::invalid(
                "sms_retry_limit",
                format!("must be within [1, 5], got {}", self.sms_retry_limit),
            ));
        }
        Ok(())
    }

    fn check_template(&self, path: &str, template: &str) -> Result<(), ConfigError> {
        for name in placeholders(template) {
            if !PLACEHOLDERS.contains(&name) {
                return Err(ConfigError::invalid(
                    path,
                    format!("unknown placeholder {{{name}}}"),
                ));
            }
        }
        let probe = self.template_context(TIME_WIDTH_PROBE);
        let rendered = render_template(template, &probe)
            .map_err(|e| ConfigError::invalid(path, e.to_string()))?;
        check_sms_body(&rendered).map_err(|e| {
            ConfigError::invalid(
                path,
                format!("rendered message is not a valid {SMS_MAX_CHARS}-character SMS: {e}"),
            )
        })
    }

    fn template_context<'a>(&'a self, time: &'a str) -> BTreeMap<&'a str, &'a str> {
        BTreeMap::from([
            ("site_name", self.site_name.as_str()),
            ("location", self.location.as_str()),
            ("time", time),
        ])
    }

    /// Renders a template with this site's context and `{time}` taken from
    /// the virtual clock. Falls back to the raw template if a placeholder is
    /// missing, which a validated config rules out.
    pub fn render(&self, template: &str, at_ms: u64) -> String {
        let time = format_clock(at_ms);
        let ctx = self.template_context(&time);
        render_template(template, &ctx).unwrap_or_else(|_| template.to_string())
    }
}

fn check_text(path: &str, s: &str) -> Result<(), ConfigError> {
    if let Some((i, c)) = s
        .chars()
        .enumerate()
        .find(|(_, c)| !crate::gsm::text::is_sms_char(*c))
    {
        return Err(ConfigError::invalid(
            path,
            format!("character {c:?} at position {i} cannot be sent in a text-mode SMS"),
        ));
    }
    Ok(())
}

/// Virtual time since scenario start as `HH:MM:SS.mmm`.
pub fn format_clock(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, milli) = (rem / 1000, rem % 1000);
    format!("{h:02}:{m:02}:{s:02}.{milli:03}")
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a template into literal runs and `{name}` placeholders.
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                if open > 0 {
                    out.push(Piece::Text(&rest[..open]));
                }
                out.push(Piece::Slot(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Piece::Text(&rest[..=open]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

/// Names of the placeholders referenced by `template`, in order.
pub fn placeholders(template: &str) -> Vec<&str> {
    pieces(template)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(name) => Some(name),
            Piece::Text(_) => None,
        })
        .collect()
}

/// Replaces every `{name}` in `template` with its value from `context`.
/// Braces that do not enclose an identifier are copied through unchanged.
pub fn render_template(
    template: &str,
    context: &BTreeMap<&str, &str>,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => {
                let value = context
                    .get(name)
                    .ok_or_else(|| TemplateError::MissingPlaceholder(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingDoc {
    resend_delay: Option<u64>,
    call_delay: Option<u64>,
    debounce: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    site_name: Option<String>,
    location: Option<String>,
    owner: Option<String>,
    fire_service: Option<String>,
    smoke_threshold: Option<f64>,
    hysteresis_ratio: Option<f64>,
    timing: Option<TimingDoc>,
    initial_template: Option<String>,
    reminder_template: Option<String>,
    input_map: Option<BTreeMap<String, InputRole>>,
    relay_map: Option<BTreeMap<String, RelayRole>>,
    sms_retry_limit: Option<u32>,
    sms_retry_backoff: Option<u64>,
}

fn classify_serde_error(err: serde_path_to_error::Error<serde_json::Error>) -> ConfigError {
    let path = err.path().to_string();
    let inner = err.into_inner();
    let msg = inner.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        let field = rest.split('`').next().unwrap_or_default();
        // The path usually ends at the offending key already.
        let full = if path == "." || path.is_empty() {
            field.to_string()
        } else if path == field || path.ends_with(&format!(".{field}")) {
            path
        } else {
            format!("{path}.{field}")
        };
        return ConfigError::UnknownField(full);
    }
    if inner.is_syntax() || inner.is_eof() {
        return ConfigError::Syntax(msg);
    }
    let path = if path == "." { String::new() } else { path };
    ConfigError::invalid(path, msg)
}

fn required_phone(path: &str, raw: Option<String>) -> Result<PhoneNumber, ConfigError> {
    let raw = raw.ok_or_else(|| ConfigError::invalid(path, "missing required field"))?;
    validate_phone(&raw).map_err(|e| ConfigError::invalid(path, e.to_string()))
}

/// Entries override the default assignment; unlisted channels keep theirs.
fn channel_map<R: Copy>(
    path: &str,
    raw: BTreeMap<String, R>,
    defaults: BTreeMap<u8, R>,
) -> Result<BTreeMap<u8, R>, ConfigError> {
    let mut out = defaults.clone();
    for (key, role) in raw {
        let ch: u8 = key
            .parse()
            .ok()
            .filter(|ch| defaults.contains_key(ch))
            .ok_or_else(|| {
                ConfigError::invalid(format!("{path}.{key}"), "no such channel")
            })?;
        out.insert(ch, role);
    }
    Ok(out)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    // Syntax problems are reported before schema problems.
    let value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    if !value.is_object() {
        return Err(ConfigError::Syntax("top level must be a JSON object".into()));
    }
    let doc: ConfigDoc =
        serde_path_to_error::deserialize(value).map_err(classify_serde_error)?;

    let owner = required_phone("owner", doc.owner)?;
    let fire_service = required_phone("fire_service", doc.fire_service)?;
    let location = doc
        .location
        .ok_or_else(|| ConfigError::invalid("location", "missing required field"))?;

    let mut cfg = Config::new(owner, fire_service, location);
    if let Some(v) = doc.site_name {
        cfg.site_name = v;
    }
    if let Some(v) = doc.smoke_threshold {
        cfg.smoke_threshold = v;
    }
    if let Some(v) = doc.hysteresis_ratio {
        cfg.hysteresis_ratio = v;
    }
    if let Some(t) = doc.timing {
        cfg.timing = TimingPlan {
            resend_delay: t.resend_delay.unwrap_or(DEFAULT_RESEND_DELAY_MS),
            call_delay: t.call_delay.unwrap_or(DEFAULT_CALL_DELAY_MS),
            debounce: t.debounce.unwrap_or(DEFAULT_DEBOUNCE_MS),
        };
    }
    if let Some(v) = doc.initial_template {
        cfg.initial_template = v;
    }
    if let Some(v) = doc.reminder_template {
        cfg.reminder_template = v;
    }
    if let Some(m) = doc.input_map {
        cfg.input_map = channel_map("input_map", m, default_input_map())?;
    }
    if let Some(m) = doc.relay_map {
        cfg.relay_map = channel_map("relay_map", m, default_relay_map())?;
    }
    if let Some(v) = doc.sms_retry_limit {
        cfg.sms_retry_limit = v;
    }
    if let Some(v) = doc.sms_retry_backoff {
        cfg.sms_retry_backoff = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical JSON form of `cfg`: every field present, keys sorted, compact.
pub fn serialize_config(cfg: &Config) -> String {
    let input_map: Map<String, Value> = cfg
        .input_map
        .iter()
        .map(|(ch, role)| (ch.to_string(), json!(role)))
        .collect();
    let relay_map: Map<String, Value> = cfg
        .relay_map
        .iter()
        .map(|(r, role)| (r.to_string(), json!(role)))
        .collect();
    let doc = json!({
        "site_name": cfg.site_name,
        "location": cfg.location,
        "owner": cfg.owner,
        "fire_service": cfg.fire_service,
        "smoke_threshold": cfg.smoke_threshold,
        "hysteresis_ratio": cfg.hysteresis_ratio,
        "timing": {
            "resend_delay": cfg.timing.resend_delay,
            "call_delay": cfg.timing.call_delay,
            "debounce": cfg.timing.debounce,
        },
        "initial_template": cfg.initial_template,
        "reminder_template": cfg.reminder_template,
        "input_map": input_map,
        "relay_map": relay_map,
        "sms_retry_limit": cfg.sms_retry_limit,
        "sms_retry_backoff": cfg.sms_retry_backoff,
    });
    doc.to_string()
}
