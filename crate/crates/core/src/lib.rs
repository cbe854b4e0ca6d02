//! Deterministic simulator for a smoke-triggered fire-safety controller.
//!
//! A smoke reading above threshold latches the facility's contactor open,
//! sounds the siren, lights the emergency lamp and starts a staged GSM
//! escalation: an SMS to the owner, a reminder with the site location to the
//! owner and the fire service, then voice calls to both unless the panel is
//! reset first. Everything runs on a virtual clock and produces a canonical,
//! byte-stable transcript.
//!
//! Modules:
//! - [`config`]: configuration documents, phone numbers, message templates
//! - [`controller`]: the escalation state machine as a pure transition function
//! - [`plant`]: sensor hysteresis, contactor, siren, lights and power rails
//! - [`gsm`]: AT command link and an emulated modem (in-process or TCP)
//! - [`sim`]: discrete-event engine and transcript records
//! - [`report`]: incident-table aggregation and transcript summaries
//! - [`cli`]: the command implementations behind the `firesafe` binary

pub mod cli;
pub mod config;
pub mod controller;
pub mod gsm;
pub mod plant;
pub mod report;
pub mod sim;

pub use config::{parse_config, serialize_config, validate_phone, Config, PhoneNumber};
pub use controller::{step, Action, ControllerState, InputEvent, InputKind, Phase, TimerKind};
pub use sim::{run_scenario, Scenario, TranscriptRecord};
