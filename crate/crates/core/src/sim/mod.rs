//! Discrete-event simulation of the controller, the facility and the modem.

pub mod engine;
pub mod queue;
pub mod scenario;
pub mod transcript;

pub use engine::{run_scenario, run_scenario_with_link, SimError, Simulation};
pub use queue::{EntryId, EventQueue, SchedulingInPast};
pub use scenario::{fault_event, parse_scenario, EventKind, Scenario, ScenarioError, ScenarioEvent};
pub use transcript::{parse_jsonl, to_jsonl, write_jsonl, RecordKind, TranscriptRecord};
