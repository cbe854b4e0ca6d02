//! Byte-level view of one SMS and one call against the emulated modem.

use firesafe::gsm::{encode_dial, encode_sms, AtCommand, ModemEmulator};
use firesafe::validate_phone;

fn show(dir: &str, bytes: &[u8]) {
    let text: String = bytes.iter().flat_map(|b| std::ascii::escape_default(*b)).map(char::from).collect();
    println!("{dir} {text}");
}

fn exchange(modem: &mut ModemEmulator, bytes: Vec<u8>) {
    show(">>", &bytes);
    show("<<", &modem.feed(&bytes));
}

fn main() {
    let owner = validate_phone("+233 24 400 0001").unwrap();
    let mut modem = ModemEmulator::new([]);

    for frame in encode_sms(&owner, "FIRE ALARM at Market Circle, Takoradi").unwrap() {
        exchange(&mut modem, frame.to_bytes());
    }
    exchange(&mut modem, encode_dial(&owner).to_bytes());
    exchange(&mut modem, AtCommand::Hangup.to_frame().to_bytes());

    // Garbage gets ERROR and the session carries on.
    exchange(&mut modem, b"AT+BOGUS\r".to_vec());

    println!("\nnetwork log:");
    for entry in modem.log() {
        println!("  {}", serde_json::to_string(entry).unwrap());
    }
}
