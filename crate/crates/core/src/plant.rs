//! The simulated facility around the controller: smoke sensor, contactor,
//! siren, emergency light, mains and backup supply.

use serde::Serialize;

use crate::config::Config;
use crate::controller::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SensorOutput {
    High,
    Low,
}

impl SensorOutput {
    pub fn name(&self) -> &'static str {
        match self {
            SensorOutput::High => "HIGH",
            SensorOutput::Low => "LOW",
        }
    }
}

/// Comparator with hysteresis: trips strictly above the threshold, releases
/// at or below `threshold * hysteresis_ratio`.
pub fn sensor_update(prev: SensorOutput, level: f64, cfg: &Config) -> SensorOutput {
    match prev {
        SensorOutput::Low if level > cfg.smoke_threshold => SensorOutput::High,
        SensorOutput::High if level <= cfg.release_level() => SensorOutput::Low,
        unchanged => unchanged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub smoke_level: f64,
    pub sensor_output: SensorOutput,
    /// Coil A1/A2 of the supply contactor.
    pub contactor_energized: bool,
    pub mains_present: bool,
    pub backup_ok: bool,
    pub siren_on: bool,
    pub emergency_light_on: bool,
    pub loads_powered: bool,
    /// Second output relay; present but unassigned.
    pub relay2_closed: bool,
}

impl Default for PlantState {
    fn default() -> Self {
        PlantState {
            smoke_level: 0.0,
            sensor_output: SensorOutput::Low,
            contactor_energized: true,
            mains_present: true,
            backup_ok: true,
            siren_on: false,
            emergency_light_on: false,
            loads_powered: true,
            relay2_closed: false,
        }
    }
}

impl PlantState {
    pub fn recompute(&mut self) {
        self.loads_powered = self.mains_present && self.contactor_energized;
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.loads_powered != (self.mains_present && self.contactor_energized) {
            return Err(format!(
                "loads_powered={} with mains_present={} contactor_energized={}",
                self.loads_powered, self.mains_present, self.contactor_energized
            ));
        }
        if self.emergency_light_on && !controller_powered(self) {
            return Err("emergency light on without any supply".into());
        }
        if self.siren_on && !controller_powered(self) {
            return Err("siren on without any supply".into());
        }
        Ok(())
    }
}

/// Applies a controller action to the plant. Notification and timer actions
/// leave it unchanged.
pub fn apply_action(p: &PlantState, a: &Action) -> PlantState {
    let mut next = p.clone();
    match a {
        Action::DeEnergizeContactor => next.contactor_energized = false,
        Action::EnergizeContactor => next.contactor_energized = true,
        Action::SirenOn => next.siren_on = true,
        Action::SirenOff => next.siren_on = false,
        Action::EmergencyLightOn => next.emergency_light_on = true,
        Action::EmergencyLightOff => next.emergency_light_on = false,
        Action::SendSms { .. }
        | Action::Dial { .. }
        | Action::StartTimer { .. }
        | Action::CancelTimer(_) => {}
    }
    next.recompute();
    next
}

/// The controller, siren and emergency light run from the 12 V rail, which
/// the backup supply keeps alive when mains is lost or tripped.
pub fn controller_powered(p: &PlantState) -> bool {
    p.mains_present || p.backup_ok
}
