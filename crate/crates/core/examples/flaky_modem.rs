//! Two CMS errors on the first SMS: with three attempts allowed the message
//! goes through two backoffs late; with two it is reported as failed.

use firesafe::gsm::InProcLink;
use firesafe::sim::{parse_scenario, run_scenario_with_link, RecordKind};
use firesafe::parse_config;

fn main() {
    let mut cfg = parse_config(include_str!("../configs/default.json")).unwrap();
    let scenario = parse_scenario(include_str!("../scenarios/flaky_modem.json")).unwrap();

    for limit in [3, 2] {
        cfg.sms_retry_limit = limit;
        let (records, link) = run_scenario_with_link(&cfg, &scenario, InProcLink::default()).unwrap();
        println!("sms_retry_limit = {limit}");
        for r in records.iter().filter(|r| {
            matches!(r.kind, RecordKind::SmsDelivered | RecordKind::NotificationFailed)
                && r.u64_field("wave") == Some(1)
        }) {
            println!(
                "  t={:>5} {} attempts={} {}",
                r.t,
                r.kind,
                r.u64_field("attempts").unwrap_or_default(),
                r.str_field("reason").unwrap_or("")
            );
        }
        println!("  modem accepted {} messages in total\n", link.network_log().len());
    }
}
