//! Emulated GSM modem speaking the text-mode subset of the AT grammar.
//!
//! [`modem_step`] is the pure per-frame transition. [`ModemEmulator`] wraps
//! it with byte-stream framing and the two in-band comment lines a client
//! may send: `#t=<ms>` sets the virtual receive time stamped on log entries,
//! and `#fault=<on>:<behavior>[:<code>]` appends a rule to the fault plan.
//! Comment lines produce no response.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::response::AtResponse;
use super::text::{check_sms_body, AtCommand, Frame, CR, CTRL_Z, ESC, LF, MAX_COMMAND_LEN};
use crate::config::PhoneNumber;

// Modem-side CMS codes.
const CMS_OPERATION_NOT_ALLOWED: u16 = 302;
const CMS_INVALID_TEXT: u16 = 304;

// Bodies longer than this are discarded while still waiting for Ctrl-Z.
const MAX_BODY_BYTES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Session {
    Idle,
    AwaitingSmsBody(PhoneNumber),
    InCall(PhoneNumber),
}

/// Which kind of input a fault rule intercepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    At,
    Echo,
    TextMode,
    Cmgs,
    SmsBody,
    Dial,
    Hangup,
    Unknown,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::At => "at",
            CommandKind::Echo => "echo",
            CommandKind::TextMode => "text_mode",
            CommandKind::Cmgs => "cmgs",
            CommandKind::SmsBody => "sms_body",
            CommandKind::Dial => "dial",
            CommandKind::Hangup => "hangup",
            CommandKind::Unknown => "unknown",
        }
    }

    fn from_name(s: &str) -> Option<CommandKind> {
        [
            CommandKind::At,
            CommandKind::Echo,
            CommandKind::TextMode,
            CommandKind::Cmgs,
            CommandKind::SmsBody,
            CommandKind::Dial,
            CommandKind::Hangup,
            CommandKind::Unknown,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn of(cmd: Option<&AtCommand>) -> CommandKind {
        match cmd {
            Some(AtCommand::Attention) => CommandKind::At,
            Some(AtCommand::Echo(_)) => CommandKind::Echo,
            Some(AtCommand::TextMode) => CommandKind::TextMode,
            Some(AtCommand::SendSms(_)) => CommandKind::Cmgs,
            Some(AtCommand::Dial(_)) => CommandKind::Dial,
            Some(AtCommand::Hangup) => CommandKind::Hangup,
            None => CommandKind::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultBehavior {
    ReplyError,
    CmsError(u16),
    /// Swallow the input and send nothing back.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultRule {
    pub on: CommandKind,
    pub behavior: FaultBehavior,
}

impl FaultRule {
    pub fn new(on: CommandKind, behavior: FaultBehavior) -> Self {
        FaultRule { on, behavior }
    }
}

/// In-band form, as carried after `#fault=`.
impl fmt::Display for FaultRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = self.on.name();
        match self.behavior {
            FaultBehavior::ReplyError => write!(f, "{on}:reply_error"),
            FaultBehavior::CmsError(code) => write!(f, "{on}:cms_error:{code}"),
            FaultBehavior::Drop => write!(f, "{on}:drop"),
        }
    }
}

impl FromStr for FaultRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let on = parts.next().unwrap_or_default();
        let on = CommandKind::from_name(on).ok_or_else(|| format!("unknown command kind `{on}`"))?;
        let behavior = match (parts.next(), parts.next()) {
            (Some("reply_error"), None) => FaultBehavior::ReplyError,
            (Some("drop"), None) => FaultBehavior::Drop,
            (Some("cms_error"), Some(code)) => {
                let code: u16 = code.parse().map_err(|_| format!("bad CMS code `{code}`"))?;
                if code > 999 {
                    return Err(format!("CMS code {code} out of range"));
                }
                FaultBehavior::CmsError(code)
            }
            _ => return Err(format!("bad fault behavior in `{s}`")),
        };
        if parts.next().is_some() {
            return Err(format!("trailing fields in `{s}`"));
        }
        Ok(FaultRule { on, behavior })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorName {
    ReplyError,
    CmsError,
    Drop,
}

fn default_on() -> CommandKind {
    CommandKind::SmsBody
}

fn one() -> u32 {
    1
}

/// Fault declaration as written in fault-plan files and scenario events.
/// `on` defaults to the SMS body submission; `repeat` expands into that many
/// consecutive rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    #[serde(default = "default_on")]
    pub on: CommandKind,
    pub behavior: BehaviorName,
    #[serde(default)]
    pub code: Option<u16>,
    #[serde(default = "one")]
    pub repeat: u32,
}

impl FaultSpec {
    pub fn rules(&self) -> Result<Vec<FaultRule>, String> {
        let behavior = match (self.behavior, self.code) {
            (BehaviorName::ReplyError, None) => FaultBehavior::ReplyError,
            (BehaviorName::Drop, None) => FaultBehavior::Drop,
            (BehaviorName::CmsError, Some(code)) if code <= 999 => FaultBehavior::CmsError(code),
            (BehaviorName::CmsError, Some(code)) => return Err(format!("CMS code {code} out of range")),
            (BehaviorName::CmsError, None) => return Err("cms_error needs a `code`".into()),
            (_, Some(_)) => return Err("`code` only applies to cms_error".into()),
        };
        Ok(vec![FaultRule::new(self.on, behavior); self.repeat as usize])
    }
}

/// Parses a fault-plan file: a JSON array of [`FaultSpec`] objects.
pub fn parse_fault_plan(text: &str) -> Result<Vec<FaultRule>, String> {
    let specs: Vec<FaultSpec> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut plan = Vec::new();
    for spec in &specs {
        plan.extend(spec.rules()?);
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogKind {
    Sms,
    Call,
}

/// One message or call the emulated network accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkLogEntry {
    pub at: u64,
    pub body: String,
    pub kind: LogKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_ref: Option<u8>,
    pub to: PhoneNumber,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModemState {
    pub echo: bool,
    pub text_mode: bool,
    pub session: Session,
    pub next_message_ref: u8,
    pub fault_plan: VecDeque<FaultRule>,
}

impl Default for ModemState {
    fn default() -> Self {
        ModemState {
            echo: false,
            text_mode: false,
            session: Session::Idle,
            next_message_ref: 0,
            fault_plan: VecDeque::new(),
        }
    }
}

impl ModemState {
    pub fn with_faults(plan: impl IntoIterator<Item = FaultRule>) -> Self {
        ModemState {
            fault_plan: plan.into_iter().collect(),
            ..ModemState::default()
        }
    }

    fn take_fault(&mut self, kind: CommandKind) -> Option<FaultBehavior> {
        let idx = self.fault_plan.iter().position(|r| r.on == kind)?;
        self.fault_plan.remove(idx).map(|r| r.behavior)
    }
}

fn reply(out: &mut Vec<u8>, r: AtResponse) {
    out.extend_from_slice(&r.to_bytes());
}

/// Applies one frame to the modem. Returns the successor state, the bytes the
/// modem sends back, and the network log entry if a message or call went out.
pub fn modem_step(
    mut m: ModemState,
    input: &Frame,
    at: u64,
) -> (ModemState, Vec<u8>, Option<NetworkLogEntry>) {
    let mut out = Vec::new();
    match input {
        Frame::Body(body) => {
            let Session::AwaitingSmsBody(to) = m.session.clone() else {
                // A body with no accepted header.
                reply(&mut out, AtResponse::Error);
                return (m, out, None);
            };
            m.session = Session::Idle;
            match m.take_fault(CommandKind::SmsBody) {
                Some(FaultBehavior::Drop) => return (m, out, None),
                Some(FaultBehavior::ReplyError) => {
                    reply(&mut out, AtResponse::Error);
                    return (m, out, None);
                }
                Some(FaultBehavior::CmsError(code)) => {
                    reply(&mut out, AtResponse::CmsError(code));
                    return (m, out, None);
                }
                None => {}
            }
            let text = match std::str::from_utf8(body) {
                Ok(t) if check_sms_body(t).is_ok() => t.to_string(),
                _ => {
                    reply(&mut out, AtResponse::CmsError(CMS_INVALID_TEXT));
                    return (m, out, None);
                }
            };
            let message_ref = m.next_message_ref;
            m.next_message_ref = m.next_message_ref.wrapping_add(1);
            reply(&mut out, AtResponse::CmgsAck(message_ref));
            reply(&mut out, AtResponse::Ok);
            let entry = NetworkLogEntry {
                at,
                body: text,
                kind: LogKind::Sms,
                message_ref: Some(message_ref),
                to,
            };
            (m, out, Some(entry))
        }
        Frame::Line(line) => {
            if m.echo {
                out.extend_from_slice(line);
                out.push(CR);
            }
            let cmd = if line.len() < MAX_COMMAND_LEN { AtCommand::parse(line) } else { None };
            match m.take_fault(CommandKind::of(cmd.as_ref())) {
                Some(FaultBehavior::Drop) => return (m, Vec::new(), None),
                Some(FaultBehavior::ReplyError) => {
                    reply(&mut out, AtResponse::Error);
                    return (m, out, None);
                }
                Some(FaultBehavior::CmsError(code)) => {
                    reply(&mut out, AtResponse::CmsError(code));
                    return (m, out, None);
                }
                None => {}
            }
            let mut entry = None;
            match cmd {
                None => reply(&mut out, AtResponse::Error),
                Some(AtCommand::Attention) => reply(&mut out, AtResponse::Ok),
                Some(AtCommand::Echo(on)) => {
                    m.echo = on;
                    reply(&mut out, AtResponse::Ok);
                }
                Some(AtCommand::TextMode) => {
                    m.text_mode = true;
                    reply(&mut out, AtResponse::Ok);
                }
                Some(AtCommand::SendSms(to)) => {
                    if m.text_mode {
                        m.session = Session::AwaitingSmsBody(to);
                        reply(&mut out, AtResponse::Prompt);
                    } else {
                        reply(&mut out, AtResponse::CmsError(CMS_OPERATION_NOT_ALLOWED));
                    }
                }
                Some(AtCommand::Dial(to)) => {
                    m.session = Session::InCall(to.clone());
                    reply(&mut out, AtResponse::Ok);
                    entry = Some(NetworkLogEntry {
                        at,
                        body: String::new(),
                        kind: LogKind::Call,
                        message_ref: None,
                        to,
                    });
                }
                Some(AtCommand::Hangup) => {
                    m.session = Session::Idle;
                    reply(&mut out, AtResponse::Ok);
                }
            }
            (m, out, entry)
        }
    }
}

/// Byte-stream front end of the emulated modem.
#[derive(Debug, Clone, Default)]
pub struct ModemEmulator {
    state: ModemState,
    clock: u64,
    pending: Vec<u8>,
    overflow: bool,
    log: Vec<NetworkLogEntry>,
}

impl ModemEmulator {
    pub fn new(plan: impl IntoIterator<Item = FaultRule>) -> Self {
        ModemEmulator {
            state: ModemState::with_faults(plan),
            ..ModemEmulator::default()
        }
    }

    pub fn state(&self) -> &ModemState {
        &self.state
    }

    pub fn log(&self) -> &[NetworkLogEntry] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<NetworkLogEntry> {
        std::mem::take(&mut self.log)
    }

    /// Consumes client bytes and returns everything the modem sends back.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for &b in bytes {
            if matches!(self.state.session, Session::AwaitingSmsBody(_)) {
                match b {
                    CTRL_Z => {
                        let body = std::mem::take(&mut self.pending);
                        if std::mem::take(&mut self.overflow) {
                            self.state.session = Session::Idle;
                            reply(&mut out, AtResponse::CmsError(CMS_INVALID_TEXT));
                        } else {
                            self.apply(&Frame::Body(body), &mut out);
                        }
                    }
                    ESC => {
                        self.pending.clear();
                        self.overflow = false;
                        self.state.session = Session::Idle;
                        reply(&mut out, AtResponse::Ok);
                    }
                    _ if self.pending.len() >= MAX_BODY_BYTES => self.overflow = true,
                    _ => self.pending.push(b),
                }
                continue;
            }
            match b {
                CR => {
                    let line = std::mem::take(&mut self.pending);
                    let overflow = std::mem::take(&mut self.overflow);
                    self.line(line, overflow, &mut out);
                }
                LF => {}
                _ if self.pending.len() >= MAX_COMMAND_LEN => self.overflow = true,
                _ => self.pending.push(b),
            }
        }
        out
    }

    fn line(&mut self, line: Vec<u8>, overflow: bool, out: &mut Vec<u8>) {
        if overflow {
            reply(out, AtResponse::Error);
            return;
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            return;
        }
        if line.first() == Some(&b'#') {
            self.comment(&line[1..]);
            return;
        }
        self.apply(&Frame::Line(line), out);
    }

    fn comment(&mut self, text: &[u8]) {
        let Ok(text) = std::str::from_utf8(text) else {
            return;
        };
        if let Some(t) = text.strip_prefix("t=") {
            if let Ok(t) = t.trim().parse() {
                self.clock = t;
            }
        } else if let Some(rule) = text.strip_prefix("fault=") {
            if let Ok(rule) = rule.trim().parse() {
                self.state.fault_plan.push_back(rule);
            }
        }
    }

    fn apply(&mut self, frame: &Frame, out: &mut Vec<u8>) {
        let state = std::mem::take(&mut self.state);
        let (state, bytes, entry) = modem_step(state, frame, self.clock);
        self.state = state;
        out.extend_from_slice(&bytes);
        self.log.extend(entry);
    }
}
