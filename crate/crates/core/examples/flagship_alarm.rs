//! Smoke at t=0 with the default configuration, no reset: the full
//! cutoff, SMS, reminder and call sequence.

use firesafe::sim::{parse_scenario, run_scenario, RecordKind};
use firesafe::parse_config;

fn main() {
    let cfg = parse_config(include_str!("../configs/default.json")).unwrap();
    let scenario = parse_scenario(include_str!("../scenarios/flagship.json")).unwrap();
    let records = run_scenario(&cfg, &scenario).unwrap();

    for r in &records {
        let detail = match r.kind {
            RecordKind::StateChange => r.str_field("phase").unwrap_or_default().to_string(),
            RecordKind::Action => r.str_field("action").unwrap_or_default().to_string(),
            RecordKind::SmsDelivered | RecordKind::CallPlaced => format!(
                "{} {} (wave {})",
                r.str_field("recipient").unwrap_or_default(),
                r.str_field("to").unwrap_or_default(),
                r.u64_field("wave").unwrap_or_default()
            ),
            RecordKind::SensorEdge => format!(
                "{} {} (onset {} ms)",
                r.str_field("input").unwrap_or_default(),
                r.str_field("output").unwrap_or_default(),
                r.u64_field("onset").unwrap_or_default()
            ),
            RecordKind::PowerChange => {
                format!("loads_powered={}", r.bool_field("loads_powered").unwrap_or_default())
            }
            _ => String::new(),
        };
        println!("{:>6} ms  {:<20} {detail}", r.t, r.kind);
    }

    println!("\nFirst message to the owner:");
    if let Some(sms) = records.iter().find(|r| r.kind == RecordKind::SmsDelivered) {
        println!("  {}", sms.str_field("body").unwrap_or_default());
    }
}
