//! Prints the escalation plan an unreset alarm follows, for the default
//! timing and for a faster reminder.

use firesafe::controller::escalation_timeline;
use firesafe::parse_config;

fn main() {
    let mut cfg = parse_config(include_str!("../configs/default.json")).unwrap();
    println!("default timing (offsets from smoke onset):");
    for entry in escalation_timeline(&cfg) {
        println!("{entry}");
    }

    cfg.timing.resend_delay = 10_000;
    cfg.validate().unwrap();
    println!("\nresend_delay = 10 s:");
    for entry in escalation_timeline(&cfg) {
        println!("{entry}");
    }
}
