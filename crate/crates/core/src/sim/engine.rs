use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use super::queue::{EntryId, EventQueue, SchedulingInPast};
use super::scenario::{EventKind, Scenario, ScenarioError};
use super::transcript::{RecordKind, TranscriptRecord};
use crate::config::{input_terminal, Config, ConfigError, InputRole};
use crate::controller::{step, Action, ControllerState, InputEvent, InputKind, Phase, TimerKind};
use crate::gsm::link::{CallOutcome, InProcLink, Link, LinkError, ModemClient, RetryPolicy, SmsOutcome};
use crate::plant::{apply_action, controller_powered, sensor_update, PlantState, SensorOutput};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Scheduling(#[from] SchedulingInPast),
    #[error("invariant violated at t={t} ms: {detail}")]
    InvariantViolation { t: u64, detail: String },
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug)]
enum Entry {
    Scenario(EventKind),
    Timer(TimerKind),
    Debounce { generation: u64, onset: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PowerSnapshot {
    backup_ok: bool,
    contactor_energized: bool,
    controller_powered: bool,
    loads_powered: bool,
    mains_present: bool,
}

impl PowerSnapshot {
    fn of(p: &PlantState) -> Self {
        PowerSnapshot {
            backup_ok: p.backup_ok,
            contactor_energized: p.contactor_energized,
            controller_powered: controller_powered(p),
            loads_powered: p.loads_powered,
            mains_present: p.mains_present,
        }
    }
}

/// One scenario run: controller, plant and modem client on a shared
/// virtual clock.
pub struct Simulation<'a, L: Link> {
    cfg: &'a Config,
    policy: RetryPolicy,
    client: ModemClient<L>,
    queue: EventQueue<Entry>,
    controller: ControllerState,
    plant: PlantState,
    debounced: SensorOutput,
    debounce_generation: u64,
    /// `None` marks a timer that came due while the controller was unpowered.
    timers: BTreeMap<TimerKind, Option<EntryId>>,
    records: Vec<TranscriptRecord>,
    wave: u64,
    smoke_input: String,
}

impl<'a, L: Link> Simulation<'a, L> {
    pub fn new(cfg: &'a Config, client: ModemClient<L>) -> Self {
        let smoke_channel = cfg.channel_for(InputRole::Smoke).unwrap_or(1);
        Simulation {
            cfg,
            policy: RetryPolicy::from_config(cfg),
            client,
            queue: EventQueue::new(),
            controller: ControllerState::normal(),
            plant: PlantState::default(),
            debounced: SensorOutput::Low,
            debounce_generation: 0,
            timers: BTreeMap::new(),
            records: Vec::new(),
            wave: 0,
            smoke_input: input_terminal(smoke_channel),
        }
    }

    /// Runs `scenario` to its horizon and returns the transcript together
    /// with the modem client.
    pub fn run(
        mut self,
        scenario: &Scenario,
    ) -> Result<(Vec<TranscriptRecord>, ModemClient<L>), SimError> {
        self.cfg.validate()?;
        scenario.validate()?;
        self.record(
            RecordKind::StateChange,
            json!({"phase": Phase::Normal.name(), "cause": "INIT"}),
        );
        for e in &scenario.events {
            self.queue.schedule(e.at, Entry::Scenario(e.kind.clone()))?;
        }
        while let Some(at) = self.queue.peek_time() {
            if at > scenario.horizon {
                break;
            }
            let Some((_, entry)) = self.queue.pop() else { break };
            self.client.advance_to(self.now());
            self.handle(entry)?;
            self.check_invariants()?;
        }
        Ok((self.records, self.client))
    }

    fn now(&self) -> u64 {
        self.queue.clock()
    }

    fn record(&mut self, kind: RecordKind, payload: Value) {
        let Value::Object(payload) = payload else {
            unreachable!("payloads are built as JSON objects")
        };
        let seq = self.records.len() as u64;
        self.records.push(TranscriptRecord { kind, payload, seq, t: self.now() });
    }

    fn check_invariants(&self) -> Result<(), SimError> {
        let violation = |detail: String| SimError::InvariantViolation { t: self.now(), detail };
        self.controller.check_invariants().map_err(violation)?;
        self.plant.check_invariants().map_err(violation)?;
        let scheduled: Vec<_> = self.timers.keys().copied().collect();
        let pending: Vec<_> = self.controller.pending_timers.iter().copied().collect();
        if scheduled != pending {
            return Err(violation(format!(
                "controller expects timers {pending:?} but {scheduled:?} are scheduled"
            )));
        }
        Ok(())
    }

    fn handle(&mut self, entry: Entry) -> Result<(), SimError> {
        match entry {
            Entry::Scenario(kind) => self.scenario_event(kind),
            Entry::Timer(kind) => {
                if controller_powered(&self.plant) {
                    self.timers.remove(&kind);
                    self.deliver(InputKind::TimerFired(kind))
                } else {
                    self.timers.insert(kind, None);
                    Ok(())
                }
            }
            Entry::Debounce { generation, onset } => {
                if generation == self.debounce_generation {
                    self.confirm_sensor(onset)?;
                }
                Ok(())
            }
        }
    }

    fn scenario_event(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::SetSmoke(level) => {
                let prev = self.plant.sensor_output;
                self.plant.smoke_level = level;
                self.plant.sensor_output = sensor_update(prev, level, self.cfg);
                if self.plant.sensor_output != prev {
                    self.debounce_generation += 1;
                    let now = self.now();
                    let debounce = self.cfg.timing.debounce;
                    if debounce == 0 {
                        self.confirm_sensor(now)?;
                    } else {
                        let generation = self.debounce_generation;
                        self.queue
                            .schedule(now + debounce, Entry::Debounce { generation, onset: now })?;
                    }
                }
                Ok(())
            }
            EventKind::PressReset => self.deliver(InputKind::ResetPressed),
            EventKind::PressRestore => self.deliver(InputKind::RestorePressed),
            EventKind::MainsFail => self.change_supply(|p| p.mains_present = false),
            EventKind::MainsRestore => self.change_supply(|p| p.mains_present = true),
            EventKind::BackupFail => self.change_supply(|p| p.backup_ok = false),
            EventKind::ModemFault(spec) => {
                // Validated with the scenario.
                for rule in spec.rules().unwrap_or_default() {
                    self.client.inject_fault(rule)?;
                }
                Ok(())
            }
        }
    }

    /// Supply changes. The siren and emergency light go dark without a rail
    /// and follow the controller's phase again once it returns. The controller
    /// keeps its state across an outage; on power-up it handles timers that
    /// came due meanwhile and a smoke level that rose while it was dark.
    fn change_supply(&mut self, f: impl FnOnce(&mut PlantState)) -> Result<(), SimError> {
        let before = PowerSnapshot::of(&self.plant);
        f(&mut self.plant);
        self.plant.recompute();
        if controller_powered(&self.plant) {
            self.plant.siren_on = self.controller.phase.is_sounding();
            self.plant.emergency_light_on = self.controller.phase != Phase::Normal;
        } else {
            self.plant.siren_on = false;
            self.plant.emergency_light_on = false;
        }
        self.note_power(before);
        if before.controller_powered || !controller_powered(&self.plant) {
            return Ok(());
        }
        let due: Vec<TimerKind> =
            self.timers.iter().filter(|(_, id)| id.is_none()).map(|(k, _)| *k).collect();
        for kind in due {
            // An earlier delivery may have cancelled it.
            if self.timers.get(&kind) == Some(&None) {
                self.timers.remove(&kind);
                self.deliver(InputKind::TimerFired(kind))?;
            }
        }
        if self.controller.phase == Phase::Normal && self.debounced == SensorOutput::High {
            let onset = self.now();
            self.deliver(InputKind::SmokeHigh { onset })?;
        }
        Ok(())
    }

    fn note_power(&mut self, before: PowerSnapshot) {
        let after = PowerSnapshot::of(&self.plant);
        if after != before {
            self.record(
                RecordKind::PowerChange,
                json!({
                    "backup_ok": after.backup_ok,
                    "contactor_energized": after.contactor_energized,
                    "controller_powered": after.controller_powered,
                    "loads_powered": after.loads_powered,
                    "mains_present": after.mains_present,
                }),
            );
        }
    }

    fn confirm_sensor(&mut self, onset: u64) -> Result<(), SimError> {
        let output = self.plant.sensor_output;
        if output == self.debounced {
            return Ok(());
        }
        self.debounced = output;
        let level_ppm = (self.plant.smoke_level * 1_000_000.0).round() as u64;
        self.record(
            RecordKind::SensorEdge,
            json!({
                "input": self.smoke_input,
                "output": output.name(),
                "level_ppm": level_ppm,
                "onset": onset,
            }),
        );
        match output {
            SensorOutput::High => self.deliver(InputKind::SmokeHigh { onset }),
            SensorOutput::Low => self.deliver(InputKind::SmokeLow),
        }
    }

    fn deliver(&mut self, kind: InputKind) -> Result<(), SimError> {
        // Without a supply rail the controller sees nothing.
        if !controller_powered(&self.plant) {
            return Ok(());
        }
        let event = InputEvent::new(self.now(), kind);
        let (next, actions) = step(&self.controller, &event, self.cfg);
        let from = self.controller.phase;
        self.controller = next;
        if from != self.controller.phase {
            self.record(
                RecordKind::StateChange,
                json!({
                    "phase": self.controller.phase.name(),
                    "from": from.name(),
                    "cause": cause(&kind),
                }),
            );
        }
        if actions.iter().any(Action::is_notification) {
            self.wave += 1;
        }
        for action in &actions {
            self.record(RecordKind::Action, action_payload(action, self.wave));
            self.execute(action)?;
        }
        // Restoring while smoke is still present re-arms immediately.
        if matches!(kind, InputKind::RestorePressed)
            && self.controller.phase == Phase::Normal
            && self.debounced == SensorOutput::High
        {
            let onset = self.now();
            self.deliver(InputKind::SmokeHigh { onset })?;
        }
        Ok(())
    }

    fn execute(&mut self, action: &Action) -> Result<(), SimError> {
        match action {
            Action::SendSms { recipient, to, body } => {
                self.client.advance_to(self.now());
                let outcome = self.client.send_sms(to, body, self.policy)?;
                self.queue.advance_to(self.client.now());
                let base = json!({
                    "recipient": recipient.name(),
                    "to": to.as_str(),
                    "wave": self.wave,
                });
                match outcome {
                    SmsOutcome::Sent { message_ref, attempts } => {
                        let mut p = base;
                        p["attempts"] = json!(attempts);
                        p["body"] = json!(body);
                        p["message_ref"] = json!(message_ref);
                        self.record(RecordKind::SmsDelivered, p);
                    }
                    SmsOutcome::Failed { attempts, last } => {
                        let mut p = base;
                        p["attempts"] = json!(attempts);
                        p["notification"] = json!("SMS");
                        p["reason"] = json!(last.describe());
                        self.record(RecordKind::NotificationFailed, p);
                    }
                }
            }
            Action::Dial { recipient, to } => {
                self.client.advance_to(self.now());
                let outcome = self.client.dial(to, self.policy)?;
                self.queue.advance_to(self.client.now());
                let mut p = json!({
                    "recipient": recipient.name(),
                    "to": to.as_str(),
                    "wave": self.wave,
                });
                match outcome {
                    CallOutcome::Placed { attempts } => {
                        p["attempts"] = json!(attempts);
                        self.record(RecordKind::CallPlaced, p);
                    }
                    CallOutcome::Failed { attempts, last } => {
                        p["attempts"] = json!(attempts);
                        p["notification"] = json!("CALL");
                        p["reason"] = json!(last.describe());
                        self.record(RecordKind::NotificationFailed, p);
                    }
                }
            }
            Action::StartTimer { kind, fire_at } => {
                // A slow modem exchange may already have pushed the clock past
                // the deadline; the timer then fires as soon as possible.
                let at = (*fire_at).max(self.now());
                let id = self.queue.schedule(at, Entry::Timer(*kind))?;
                self.timers.insert(*kind, Some(id));
            }
            Action::CancelTimer(kind) => {
                if let Some(Some(id)) = self.timers.remove(kind) {
                    self.queue.cancel(id);
                }
            }
            plant_action => {
                let before = PowerSnapshot::of(&self.plant);
                self.plant = apply_action(&self.plant, plant_action);
                self.note_power(before);
            }
        }
        Ok(())
    }
}

fn cause(kind: &InputKind) -> &'static str {
    match kind {
        InputKind::SmokeHigh { .. } => "SMOKE_HIGH",
        InputKind::SmokeLow => "SMOKE_LOW",
        InputKind::ResetPressed => "RESET",
        InputKind::RestorePressed => "RESTORE",
        InputKind::TimerFired(TimerKind::Resend) => "TIMER_RESEND",
        InputKind::TimerFired(TimerKind::Call) => "TIMER_CALL",
    }
}

fn action_payload(action: &Action, wave: u64) -> Value {
    match action {
        Action::DeEnergizeContactor => json!({"action": "de_energize_contactor"}),
        Action::EnergizeContactor => json!({"action": "energize_contactor"}),
        Action::SirenOn => json!({"action": "siren_on"}),
        Action::SirenOff => json!({"action": "siren_off"}),
        Action::EmergencyLightOn => json!({"action": "emergency_light_on"}),
        Action::EmergencyLightOff => json!({"action": "emergency_light_off"}),
        Action::SendSms { recipient, to, body } => json!({
            "action": "send_sms",
            "body": body,
            "recipient": recipient.name(),
            "to": to.as_str(),
            "wave": wave,
        }),
        Action::Dial { recipient, to } => json!({
            "action": "dial",
            "recipient": recipient.name(),
            "to": to.as_str(),
            "wave": wave,
        }),
        Action::StartTimer { kind, fire_at } => json!({
            "action": "start_timer",
            "fire_at": fire_at,
            "timer": kind.name(),
        }),
        Action::CancelTimer(kind) => json!({"action": "cancel_timer", "timer": kind.name()}),
    }
}

/// Runs a scenario against the in-process modem emulator.
pub fn run_scenario(cfg: &Config, scenario: &Scenario) -> Result<Vec<TranscriptRecord>, SimError> {
    run_scenario_with_link(cfg, scenario, InProcLink::default()).map(|(records, _)| records)
}

/// Runs a scenario over an arbitrary modem link and hands the link back.
pub fn run_scenario_with_link<L: Link>(
    cfg: &Config,
    scenario: &Scenario,
    link: L,
) -> Result<(Vec<TranscriptRecord>, L), SimError> {
    let (records, client) = Simulation::new(cfg, ModemClient::new(link)).run(scenario)?;
    Ok((records, client.into_link()))
}
