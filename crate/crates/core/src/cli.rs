//! Command implementations behind the `firesafe` binary. Each writes to the
//! given streams and returns the process exit status.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::config::{parse_config, serialize_config, Config};
use crate::gsm::link::{InProcLink, Link, TcpLink};
use crate::gsm::modem::parse_fault_plan;
use crate::gsm::server::serve;
use crate::report;
use crate::sim::{parse_scenario, run_scenario_with_link, to_jsonl, Scenario, SimError};

/// Wall-clock bound on a single read from a TCP modem.
pub const TCP_READ_WAIT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ValidationFailure = 1,
    RuntimeFailure = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModemTarget {
    InProc,
    Tcp(String),
}

impl FromStr for ModemTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(ModemTarget::InProc),
            _ => match s.strip_prefix("tcp:") {
                Some(addr) if !addr.is_empty() => Ok(ModemTarget::Tcp(addr.to_string())),
                _ => Err(format!("expected `inproc` or `tcp:<host:port>`, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for ModemTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModemTarget::InProc => f.write_str("inproc"),
            ModemTarget::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Incidents,
    Transcript,
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incidents" => Ok(ReportKind::Incidents),
            "transcript" => Ok(ReportKind::Transcript),
            _ => Err(format!("expected `incidents` or `transcript`, got `{s}`")),
        }
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn report(self, err: &mut dyn Write) -> ExitStatus {
        let (msg, status) = match self {
            Failure::Validation(m) => (m, ExitStatus::ValidationFailure),
            Failure::Runtime(m) => (m, ExitStatus::RuntimeFailure),
        };
        let _ = writeln!(err, "error: {msg}");
        status
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<Config, Failure> {
    parse_config(&read(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    parse_scenario(&read(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn finish(result: Result<(), Failure>, err: &mut dyn Write) -> ExitStatus {
    match result {
        Ok(()) => ExitStatus::Success,
        Err(f) => f.report(err),
    }
}

pub fn cmd_validate(config_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let result = load_config(config_path).and_then(|cfg| {
        writeln!(out, "OK\n{}", serialize_config(&cfg)).map_err(io_failure)
    });
    finish(result, err)
}

fn simulate<L: Link>(cfg: &Config, scenario: &Scenario, link: L) -> Result<String, Failure> {
    match run_scenario_with_link(cfg, scenario, link) {
        Ok((records, _)) => Ok(to_jsonl(&records)),
        Err(e @ (SimError::Config(_) | SimError::Scenario(_))) => {
            Err(Failure::Validation(e.to_string()))
        }
        Err(e) => Err(Failure::Runtime(e.to_string())),
    }
}

pub fn cmd_run(
    config_path: &Path,
    scenario_path: &Path,
    out_path: &Path,
    modem: &ModemTarget,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let result = (|| {
        let cfg = load_config(config_path)?;
        let scenario = load_scenario(scenario_path)?;
        let transcript = match modem {
            ModemTarget::InProc => simulate(&cfg, &scenario, InProcLink::default())?,
            ModemTarget::Tcp(addr) => {
                let link = TcpLink::connect(addr.as_str(), TCP_READ_WAIT)
                    .map_err(|e| Failure::Runtime(format!("modem at {addr}: {e}")))?;
                simulate(&cfg, &scenario, link)?
            }
        };
        fs::write(out_path, &transcript)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", out_path.display())))?;
        let s = report::summarize_transcript(&transcript)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        writeln!(
            out,
            "{}: {} records, sms_sent {}, calls_placed {}, failures {} -> {}",
            scenario.name,
            transcript.lines().count(),
            s.sms_sent,
            s.calls_placed,
            s.failures,
            out_path.display()
        )
        .map_err(io_failure)
    })();
    finish(result, err)
}

/// Serves the emulated modem on `listen`. Runs until the listener fails,
/// or for `max_sessions` connections when given. Log entries go to
/// `log_path` when set, otherwise to `out`.
pub fn cmd_modem_serve(
    listen: &str,
    faults_path: Option<&Path>,
    log_path: Option<&Path>,
    max_sessions: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let result = (|| {
        let plan = match faults_path {
            Some(p) => parse_fault_plan(&read(p)?)
                .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?,
            None => Vec::new(),
        };
        let listener = TcpListener::bind(listen)
            .map_err(|e| Failure::Runtime(format!("cannot listen on {listen}: {e}")))?;
        let addr = listener.local_addr().map_err(io_failure)?;
        writeln!(out, "listening on {addr}").map_err(io_failure)?;
        out.flush().map_err(io_failure)?;
        match log_path {
            Some(p) => {
                let mut file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
                serve(&listener, &plan, &mut file, max_sessions)
            }
            None => serve(&listener, &plan, out, max_sessions),
        }
        .map_err(io_failure)
    })();
    finish(result, err)
}

pub fn cmd_report(
    kind: ReportKind,
    input_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let result = (|| {
        let text = read(input_path)?;
        let invalid = |e: report::ReportError| {
            Failure::Validation(format!("{}: {e}", input_path.display()))
        };
        let rendered = match kind {
            ReportKind::Incidents => {
                let records = report::parse_incidents(&text).map_err(invalid)?;
                report::render_incidents(&report::aggregate(&records).map_err(invalid)?)
            }
            ReportKind::Transcript => report::render_transcript_summary(
                &report::summarize_transcript(&text).map_err(invalid)?,
            ),
        };
        out.write_all(rendered.as_bytes()).map_err(io_failure)
    })();
    finish(result, err)
}
