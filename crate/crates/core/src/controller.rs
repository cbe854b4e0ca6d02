//! The escalation protocol as a pure, clocked transition function.
//!
//! ```text
//! NORMAL --smoke--> ALARM_ACTIVE --resend timer--> REMINDED --call timer--> ESCALATED
//!                        |                            |                         |
//!                        +-----------reset------------+-----------reset---------+
//!                                                     v
//!                                             LATCHED_TRIPPED --restore--> NORMAL
//! ```
//!
//! Alarm onset cuts power, sounds the siren, lights the emergency lamp and
//! texts the owner. The reminder wave texts the owner and then the fire
//! service; the call wave dials them in the same order. Reset silences the
//! siren and cancels escalation but keeps the contactor open until an
//! explicit restore.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::config::{Config, PhoneNumber};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Normal,
    AlarmActive,
    Reminded,
    Escalated,
    LatchedTripped,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Normal => "NORMAL",
            Phase::AlarmActive => "ALARM_ACTIVE",
            Phase::Reminded => "REMINDED",
            Phase::Escalated => "ESCALATED",
            Phase::LatchedTripped => "LATCHED_TRIPPED",
        }
    }

    /// Siren-sounding phases.
    pub fn is_sounding(&self) -> bool {
        matches!(self, Phase::AlarmActive | Phase::Reminded | Phase::Escalated)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Timer kinds, ordered so RESEND wins a tie with CALL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TimerKind {
    Resend,
    Call,
}

impl TimerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TimerKind::Resend => "RESEND",
            TimerKind::Call => "CALL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    Owner,
    FireService,
}

impl Recipient {
    pub fn name(&self) -> &'static str {
        match self {
            Recipient::Owner => "owner",
            Recipient::FireService => "fire_service",
        }
    }

    pub fn number<'a>(&self, cfg: &'a Config) -> &'a PhoneNumber {
        match self {
            Recipient::Owner => &cfg.owner,
            Recipient::FireService => &cfg.fire_service,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    DeEnergizeContactor,
    EnergizeContactor,
    SirenOn,
    SirenOff,
    EmergencyLightOn,
    EmergencyLightOff,
    SendSms {
        recipient: Recipient,
        to: PhoneNumber,
        body: String,
    },
    Dial {
        recipient: Recipient,
        to: PhoneNumber,
    },
    StartTimer {
        kind: TimerKind,
        fire_at: u64,
    },
    CancelTimer(TimerKind),
}

impl Action {
    pub fn is_notification(&self) -> bool {
        matches!(self, Action::SendSms { .. } | Action::Dial { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputKind {
    /// Smoke confirmed above threshold; `onset` is when the level first
    /// crossed it, which anchors the escalation timers.
    SmokeHigh { onset: u64 },
    SmokeLow,
    ResetPressed,
    RestorePressed,
    TimerFired(TimerKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputEvent {
    pub at: u64,
    pub kind: InputKind,
}

impl InputEvent {
    pub fn new(at: u64, kind: InputKind) -> Self {
        InputEvent { at, kind }
    }

    /// Smoke detected with onset at the event time.
    pub fn smoke(at: u64) -> Self {
        InputEvent::new(at, InputKind::SmokeHigh { onset: at })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControllerState {
    pub phase: Phase,
    pub alarm_started_at: Option<u64>,
    pub pending_timers: BTreeSet<TimerKind>,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            phase: Phase::Normal,
            alarm_started_at: None,
            pending_timers: BTreeSet::new(),
        }
    }
}

impl ControllerState {
    pub fn normal() -> Self {
        ControllerState::default()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let quiet = self.alarm_started_at.is_none() && self.pending_timers.is_empty();
        if (self.phase == Phase::Normal) != quiet {
            return Err(format!(
                "phase {} with alarm_started_at={:?} and timers {:?}",
                self.phase, self.alarm_started_at, self.pending_timers
            ));
        }
        if self.pending_timers.contains(&TimerKind::Resend) && self.phase != Phase::AlarmActive {
            return Err(format!("RESEND pending in phase {}", self.phase));
        }
        if self.pending_timers.contains(&TimerKind::Call)
            && !matches!(self.phase, Phase::AlarmActive | Phase::Reminded)
        {
            return Err(format!("CALL pending in phase {}", self.phase));
        }
        if matches!(self.phase, Phase::Escalated | Phase::LatchedTripped)
            && !self.pending_timers.is_empty()
        {
            return Err(format!("timers pending in phase {}", self.phase));
        }
        Ok(())
    }
}

fn notify_both(cfg: &Config, mut make: impl FnMut(Recipient, PhoneNumber) -> Action) -> [Action; 2] {
    [
        make(Recipient::Owner, cfg.owner.clone()),
        make(Recipient::FireService, cfg.fire_service.clone()),
    ]
}

/// Computes the successor state and the ordered side effects for one input.
/// Inputs that mean nothing in the current phase produce no actions.
pub fn step(
    state: &ControllerState,
    event: &InputEvent,
    cfg: &Config,
) -> (ControllerState, Vec<Action>) {
    let mut next = state.clone();
    let mut actions = Vec::new();
    match (state.phase, event.kind) {
        (Phase::Normal, InputKind::SmokeHigh { onset }) => {
            let onset = onset.min(event.at);
            let timing = &cfg.timing;
            let resend_at = (onset + timing.resend_delay).max(event.at);
            let call_at = (onset + timing.call_delay).max(event.at);
            next.phase = Phase::AlarmActive;
            next.alarm_started_at = Some(onset);
            next.pending_timers = BTreeSet::from([TimerKind::Resend, TimerKind::Call]);
            actions.extend([
                Action::DeEnergizeContactor,
                Action::SirenOn,
                Action::EmergencyLightOn,
                Action::SendSms {
                    recipient: Recipient::Owner,
                    to: cfg.owner.clone(),
                    body: cfg.render(&cfg.initial_template, onset),
                },
                Action::StartTimer { kind: TimerKind::Resend, fire_at: resend_at },
                Action::StartTimer { kind: TimerKind::Call, fire_at: call_at },
            ]);
        }
        (Phase::AlarmActive, InputKind::TimerFired(TimerKind::Resend))
            if state.pending_timers.contains(&TimerKind::Resend) =>
        {
            let started = state.alarm_started_at.unwrap_or(event.at);
            let body = cfg.render(&cfg.reminder_template, started);
            next.phase = Phase::Reminded;
            next.pending_timers.remove(&TimerKind::Resend);
            actions.extend(notify_both(cfg, |recipient, to| Action::SendSms {
                recipient,
                to,
                body: body.clone(),
            }));
        }
        (Phase::AlarmActive | Phase::Reminded, InputKind::TimerFired(TimerKind::Call))
            if state.pending_timers.contains(&TimerKind::Call) =>
        {
            // Only reachable ahead of the reminder if call_delay < resend_delay.
            if state.pending_timers.contains(&TimerKind::Resend) {
                actions.push(Action::CancelTimer(TimerKind::Resend));
            }
            next.phase = Phase::Escalated;
            next.pending_timers.clear();
            actions.extend(notify_both(cfg, |recipient, to| Action::Dial { recipient, to }));
        }
        (Phase::AlarmActive | Phase::Reminded | Phase::Escalated, InputKind::ResetPressed) => {
            next.phase = Phase::LatchedTripped;
            next.pending_timers.clear();
            actions.push(Action::SirenOff);
            actions.extend(state.pending_timers.iter().map(|k| Action::CancelTimer(*k)));
        }
        (Phase::LatchedTripped, InputKind::RestorePressed) => {
            next = ControllerState::normal();
            actions.extend([Action::EnergizeContactor, Action::EmergencyLightOff]);
        }
        _ => {}
    }
    (next, actions)
}

/// Externally visible effect of an uninterrupted alarm, without timer
/// bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannedAction {
    PowerCutoff,
    SirenOn,
    EmergencyLightOn,
    Sms(Recipient),
    Call(Recipient),
}

impl fmt::Display for PlannedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannedAction::PowerCutoff => f.write_str("power cutoff"),
            PlannedAction::SirenOn => f.write_str("siren on"),
            PlannedAction::EmergencyLightOn => f.write_str("emergency light on"),
            PlannedAction::Sms(r) => write!(f, "SMS -> {}", r.name()),
            PlannedAction::Call(r) => write!(f, "call -> {}", r.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineEntry {
    pub offset_ms: u64,
    pub actions: Vec<PlannedAction>,
}

impl fmt::Display for TimelineEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6} ms:", self.offset_ms)?;
        for (i, a) in self.actions.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}{a}")?;
        }
        Ok(())
    }
}

fn planned(action: &Action) -> Option<PlannedAction> {
    Some(match action {
        Action::DeEnergizeContactor => PlannedAction::PowerCutoff,
        Action::SirenOn => PlannedAction::SirenOn,
        Action::EmergencyLightOn => PlannedAction::EmergencyLightOn,
        Action::SendSms { recipient, .. } => PlannedAction::Sms(*recipient),
        Action::Dial { recipient, .. } => PlannedAction::Call(*recipient),
        _ => return None,
    })
}

/// The schedule [`step`] produces for an alarm starting at offset 0 that is
/// never reset, one entry per transition that has visible effects.
pub fn escalation_timeline(cfg: &Config) -> Vec<TimelineEntry> {
    let mut state = ControllerState::normal();
    // (fire_at, start order, kind): ties fire in the order they were started.
    let mut timers: Vec<(u64, usize, TimerKind)> = Vec::new();
    let mut started = 0;
    let mut entries = Vec::new();
    let mut event = Some(InputEvent::smoke(0));
    while let Some(ev) = event.take() {
        let (next, actions) = step(&state, &ev, cfg);
        state = next;
        for a in &actions {
            match a {
                Action::StartTimer { kind, fire_at } => {
                    timers.push((*fire_at, started, *kind));
                    started += 1;
                }
                Action::CancelTimer(kind) => timers.retain(|t| t.2 != *kind),
                _ => {}
            }
        }
        let visible: Vec<_> = actions.iter().filter_map(planned).collect();
        if !visible.is_empty() {
            entries.push(TimelineEntry { offset_ms: ev.at, actions: visible });
        }
        timers.sort();
        if !timers.is_empty() {
            let (at, _, kind) = timers.remove(0);
            event = Some(InputEvent::new(at, InputKind::TimerFired(kind)));
        }
    }
    entries
}
