//! Mains failure before a fire: the backup supply keeps the controller,
//! siren and emergency light alive while the loads stay dark.

use firesafe::sim::{parse_scenario, run_scenario, RecordKind};
use firesafe::parse_config;

fn main() {
    let cfg = parse_config(include_str!("../configs/default.json")).unwrap();
    let scenario = parse_scenario(include_str!("../scenarios/mains_failure.json")).unwrap();
    for r in run_scenario(&cfg, &scenario).unwrap() {
        match r.kind {
            RecordKind::PowerChange => println!(
                "{:>6} ms  mains={} contactor={} loads={} controller={}",
                r.t,
                r.bool_field("mains_present").unwrap_or_default(),
                r.bool_field("contactor_energized").unwrap_or_default(),
                r.bool_field("loads_powered").unwrap_or_default(),
                r.bool_field("controller_powered").unwrap_or_default(),
            ),
            RecordKind::StateChange => {
                println!("{:>6} ms  phase {}", r.t, r.str_field("phase").unwrap_or_default())
            }
            _ => {}
        }
    }
}
