//! Configuration parsing: a good file, then a few broken ones and the field
//! path each error points at.

use firesafe::{parse_config, serialize_config};

fn main() {
    let cfg = parse_config(include_str!("../configs/takoradi_market.json")).unwrap();
    println!("canonical form:\n{}\n", serialize_config(&cfg));
    println!("reminder preview:\n{}\n", cfg.render(&cfg.reminder_template, 12_000));

    let base = r#""owner":"+233244000001","fire_service":"+233302000001","location":"Market Circle""#;
    let broken = [
        format!(r#"{{{base},"timing":{{"resend_delay":20000}}}}"#),
        format!(r#"{{{base},"smoke_threshold":1.5}}"#),
        format!(r#"{{{base},"reminder_template":"Fire on {{floor}}"}}"#),
        format!(r#"{{{base},"input_map":{{"5":"smoke"}}}}"#),
        format!(r#"{{{base},"sms_retry_limit":9}}"#),
        format!(r#"{{{base},"siren":true}}"#),
        r#"{"owner":"0244000001","fire_service":"+233302000001","location":"x"}"#.to_string(),
        "[1, 2".to_string(),
    ];
    for doc in &broken {
        let err = parse_config(doc).unwrap_err();
        println!("{:<22} {err}", err.path().unwrap_or("-"));
    }
}
