//! TCP front end for the emulated modem: one session per connection,
//! connections served one after another.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};

use super::modem::{FaultRule, ModemEmulator};

/// Serves one connection until the peer closes it, appending every network
/// log entry to `log` as a JSON line.
pub fn serve_session(
    mut stream: TcpStream,
    plan: &[FaultRule],
    log: &mut dyn Write,
) -> io::Result<()> {
    let mut modem = ModemEmulator::new(plan.iter().copied());
    let mut buf = [0u8; 1024];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::ConnectionReset => return Ok(()),
            Err(e) => return Err(e),
        };
        let out = modem.feed(&buf[..n]);
        for entry in modem.take_log() {
            let line = serde_json::to_string(&entry).map_err(io::Error::other)?;
            writeln!(log, "{line}")?;
        }
        log.flush()?;
        if !out.is_empty() {
            stream.write_all(&out)?;
        }
    }
}

/// Accepts connections serially. Each session starts from a fresh copy of
/// `plan`. Stops after `max_sessions` sessions when given, otherwise runs
/// until the listener fails.
pub fn serve(
    listener: &TcpListener,
    plan: &[FaultRule],
    log: &mut dyn Write,
    max_sessions: Option<usize>,
) -> io::Result<()> {
    let mut served = 0;
    while max_sessions.is_none_or(|max| served < max) {
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        serve_session(stream, plan, log)?;
        served += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsm::modem::NetworkLogEntry;
    use std::thread;

    #[test]
    fn malformed_line_keeps_session_open() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let mut log = Vec::new();
            serve(&listener, &[], &mut log, Some(1)).unwrap();
            log
        });
        let mut s = TcpStream::connect(addr).unwrap();
        let mut expect = |send: &[u8], want: &[u8]| {
            s.write_all(send).unwrap();
            let mut got = vec![0u8; want.len()];
            s.read_exact(&mut got).unwrap();
            assert_eq!(got, want);
        };
        expect(b"HELLO\r", b"\r\nERROR\r\n");
        expect(b"#t=7\rATD+233244000001;\r", b"\r\nOK\r\n");
        drop(s);
        let log = server.join().unwrap();
        let entry: NetworkLogEntry =
            serde_json::from_str(std::str::from_utf8(&log).unwrap().trim()).unwrap();
        assert_eq!(entry.at, 7);
    }
}
