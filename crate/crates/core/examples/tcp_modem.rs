//! Runs the flagship scenario against a modem served over TCP and checks the
//! transcript matches the in-process run byte for byte.

use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use firesafe::gsm::server::serve;
use firesafe::gsm::TcpLink;
use firesafe::sim::{parse_scenario, run_scenario, run_scenario_with_link, to_jsonl};
use firesafe::parse_config;

fn main() {
    let cfg = parse_config(include_str!("../configs/default.json")).unwrap();
    let scenario = parse_scenario(include_str!("../scenarios/flagship.json")).unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let mut log = Vec::new();
        serve(&listener, &[], &mut log, Some(1)).unwrap();
        String::from_utf8(log).unwrap()
    });

    let link = TcpLink::connect(addr, Duration::from_secs(2)).unwrap();
    let (remote, link) = run_scenario_with_link(&cfg, &scenario, link).unwrap();
    drop(link);
    let modem_log = server.join().unwrap();

    let local = run_scenario(&cfg, &scenario).unwrap();
    println!("modem at {addr} logged:");
    print!("{modem_log}");
    println!(
        "\ntranscripts identical: {}",
        to_jsonl(&remote) == to_jsonl(&local)
    );
}
