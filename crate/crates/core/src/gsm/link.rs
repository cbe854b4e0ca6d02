//! Controller side of the modem link: transports and the retrying client.
//!
//! The client runs on virtual time. A response that does not arrive counts
//! as a timeout and advances the client clock by the link timeout; retry
//! backoff advances it the same way. The bytes on the wire are identical for
//! every transport, so in-process and TCP runs are interchangeable.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use super::modem::{FaultRule, ModemEmulator, NetworkLogEntry};
use super::response::{parse_response, AtResponse, MalformedResponse, Parsed};
use super::text::{encode_dial, encode_sms, AtCommand, EncodeError, Frame};
use crate::config::{Config, PhoneNumber};

pub const DEFAULT_RESPONSE_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("modem link closed")]
    Closed,
    #[error("modem link I/O error: {0}")]
    Io(#[from] io::Error),
}

/// A point-to-point ordered byte stream to a modem.
pub trait Link {
    fn send(&mut self, bytes: &[u8]) -> Result<(), LinkError>;

    /// Returns the bytes that arrived, or an empty vector when nothing came
    /// back before the transport gave up waiting.
    fn recv(&mut self) -> Result<Vec<u8>, LinkError>;
}

/// Link to an emulator living in the same process.
#[derive(Debug, Default)]
pub struct InProcLink {
    modem: ModemEmulator,
    inbox: Vec<u8>,
}

impl InProcLink {
    pub fn new(modem: ModemEmulator) -> Self {
        InProcLink { modem, inbox: Vec::new() }
    }

    pub fn with_faults(plan: impl IntoIterator<Item = FaultRule>) -> Self {
        InProcLink::new(ModemEmulator::new(plan))
    }

    pub fn modem(&self) -> &ModemEmulator {
        &self.modem
    }

    pub fn network_log(&self) -> &[NetworkLogEntry] {
        self.modem.log()
    }
}

impl Link for InProcLink {
    fn send(&mut self, bytes: &[u8]) -> Result<(), LinkError> {
        let out = self.modem.feed(bytes);
        self.inbox.extend_from_slice(&out);
        Ok(())
    }

    fn recv(&mut self) -> Result<Vec<u8>, LinkError> {
        Ok(std::mem::take(&mut self.inbox))
    }
}

/// Link to a remote modem emulator over TCP.
#[derive(Debug)]
pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    /// `wait` bounds how long a single `recv` blocks in wall-clock time.
    pub fn connect(addr: impl ToSocketAddrs, wait: Duration) -> Result<Self, LinkError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(wait))?;
        Ok(TcpLink { stream })
    }
}

impl Link for TcpLink {
    fn send(&mut self, bytes: &[u8]) -> Result<(), LinkError> {
        self.stream.write_all(bytes).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => LinkError::Closed,
            _ => LinkError::Io(e),
        })
    }

    fn recv(&mut self) -> Result<Vec<u8>, LinkError> {
        let mut buf = [0u8; 512];
        match self.stream.read(&mut buf) {
            Ok(0) => Err(LinkError::Closed),
            Ok(n) => Ok(buf[..n].to_vec()),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Ok(Vec::new())
            }
            Err(e) if e.kind() == io::ErrorKind::ConnectionReset => Err(LinkError::Closed),
            Err(e) => Err(LinkError::Io(e)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, the first one included.
    pub limit: u32,
    pub backoff_ms: u64,
}

impl RetryPolicy {
    pub fn from_config(cfg: &Config) -> Self {
        RetryPolicy {
            limit: cfg.sms_retry_limit,
            backoff_ms: cfg.sms_retry_backoff,
        }
    }
}

/// Why an attempt did not go through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptFailure {
    Error,
    CmsError(u16),
    Timeout,
    Unexpected(AtResponse),
    Malformed(usize),
    /// The body could not be encoded; nothing was sent.
    Rejected(EncodeError),
}

impl AttemptFailure {
    pub fn describe(&self) -> String {
        match self {
            AttemptFailure::Error => "ERROR".into(),
            AttemptFailure::CmsError(code) => format!("+CMS ERROR: {code}"),
            AttemptFailure::Timeout => "timeout".into(),
            AttemptFailure::Unexpected(r) => format!("unexpected response {r:?}"),
            AttemptFailure::Malformed(offset) => format!("malformed response at byte {offset}"),
            AttemptFailure::Rejected(e) => e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmsOutcome {
    Sent { message_ref: u8, attempts: u32 },
    Failed { attempts: u32, last: AttemptFailure },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallOutcome {
    Placed { attempts: u32 },
    Failed { attempts: u32, last: AttemptFailure },
}

type Attempt<T> = Result<Result<T, AttemptFailure>, LinkError>;
/// Success with the attempt count, or the attempt count and last failure.
type Retried<T> = Result<(T, u32), (u32, AttemptFailure)>;

/// Drives a modem over a [`Link`], one command outstanding at a time.
#[derive(Debug)]
pub struct ModemClient<L> {
    link: L,
    now: u64,
    timeout_ms: u64,
    rx: Vec<u8>,
}

impl<L: Link> ModemClient<L> {
    pub fn new(link: L) -> Self {
        ModemClient {
            link,
            now: 0,
            timeout_ms: DEFAULT_RESPONSE_TIMEOUT_MS,
            rx: Vec::new(),
        }
    }

    pub fn with_timeout(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Moves the client clock forward; it never moves back.
    pub fn advance_to(&mut self, t: u64) {
        self.now = self.now.max(t);
    }

    pub fn link(&self) -> &L {
        &self.link
    }

    pub fn into_link(self) -> L {
        self.link
    }

    /// Queues a fault rule on the remote modem via the in-band comment line.
    pub fn inject_fault(&mut self, rule: FaultRule) -> Result<(), LinkError> {
        self.link.send(format!("#fault={rule}\r").as_bytes())
    }

    fn stamp(&mut self) -> Result<(), LinkError> {
        self.link.send(format!("#t={}\r", self.now).as_bytes())
    }

    fn read_unit(&mut self, echo: Option<&[u8]>) -> Attempt<AtResponse> {
        let mut echo = echo.map(<[u8]>::to_vec);
        loop {
            if let Some(e) = &echo {
                if self.rx.starts_with(e) {
                    self.rx.drain(..e.len());
                    echo = None;
                } else if !e.starts_with(&self.rx) {
                    echo = None;
                }
            }
            if echo.is_none() {
                match parse_response(&self.rx) {
                    Ok(Parsed::Complete(r, n)) => {
                        self.rx.drain(..n);
                        return Ok(Ok(r));
                    }
                    Ok(Parsed::NeedMoreData) => {}
                    Err(MalformedResponse { offset }) => {
                        self.rx.clear();
                        return Ok(Err(AttemptFailure::Malformed(offset)));
                    }
                }
            }
            let chunk = self.link.recv()?;
            if chunk.is_empty() {
                self.now += self.timeout_ms;
                self.rx.clear();
                return Ok(Err(AttemptFailure::Timeout));
            }
            self.rx.extend_from_slice(&chunk);
        }
    }

    fn exchange(&mut self, frame: &Frame, expect: AtResponse) -> Attempt<AtResponse> {
        let bytes = frame.to_bytes();
        self.link.send(&bytes)?;
        let echo = matches!(frame, Frame::Line(_)).then_some(bytes.as_slice());
        Ok(match self.read_unit(echo)? {
            Ok(r) if r == expect => Ok(r),
            Ok(r) => Err(unexpected(r)),
            Err(f) => Err(f),
        })
    }

    fn sms_attempt(&mut self, frames: &[Frame]) -> Attempt<u8> {
        self.stamp()?;
        if let Err(f) = self.exchange(&frames[0], AtResponse::Ok)? {
            return Ok(Err(f));
        }
        if let Err(f) = self.exchange(&frames[1], AtResponse::Prompt)? {
            return Ok(Err(f));
        }
        self.link.send(&frames[2].to_bytes())?;
        let message_ref = match self.read_unit(None)? {
            Ok(AtResponse::CmgsAck(r)) => r,
            Ok(r) => return Ok(Err(unexpected(r))),
            Err(f) => return Ok(Err(f)),
        };
        Ok(match self.read_unit(None)? {
            Ok(AtResponse::Ok) => Ok(message_ref),
            Ok(r) => Err(unexpected(r)),
            Err(f) => Err(f),
        })
    }

    fn dial_attempt(&mut self, to: &PhoneNumber) -> Attempt<()> {
        self.stamp()?;
        if let Err(f) = self.exchange(&encode_dial(to), AtResponse::Ok)? {
            return Ok(Err(f));
        }
        // The alert is out once the dial is accepted; hanging up frees the
        // line for the next recipient and its result does not matter.
        let _ = self.exchange(&AtCommand::Hangup.to_frame(), AtResponse::Ok)?;
        Ok(Ok(()))
    }

    fn with_retry<T>(
        &mut self,
        policy: RetryPolicy,
        mut attempt: impl FnMut(&mut Self) -> Attempt<T>,
    ) -> Result<Retried<T>, LinkError> {
        let limit = policy.limit.max(1);
        let mut last = AttemptFailure::Timeout;
        for n in 1..=limit {
            if n > 1 {
                self.now += policy.backoff_ms;
            }
            match attempt(self)? {
                Ok(v) => return Ok(Ok((v, n))),
                Err(f) => last = f,
            }
        }
        Ok(Err((limit, last)))
    }

    /// Submits one SMS, retrying after `policy.backoff_ms` on any failure.
    pub fn send_sms(
        &mut self,
        to: &PhoneNumber,
        body: &str,
        policy: RetryPolicy,
    ) -> Result<SmsOutcome, LinkError> {
        let frames = match encode_sms(to, body) {
            Ok(f) => f,
            Err(e) => {
                return Ok(SmsOutcome::Failed {
                    attempts: 0,
                    last: AttemptFailure::Rejected(e),
                })
            }
        };
        Ok(match self.with_retry(policy, |c| c.sms_attempt(&frames))? {
            Ok((message_ref, attempts)) => SmsOutcome::Sent { message_ref, attempts },
            Err((attempts, last)) => SmsOutcome::Failed { attempts, last },
        })
    }

    /// Places a voice-call alert under the same retry policy as SMS.
    pub fn dial(&mut self, to: &PhoneNumber, policy: RetryPolicy) -> Result<CallOutcome, LinkError> {
        Ok(match self.with_retry(policy, |c| c.dial_attempt(to))? {
            Ok(((), attempts)) => CallOutcome::Placed { attempts },
            Err((attempts, last)) => CallOutcome::Failed { attempts, last },
        })
    }
}

fn unexpected(r: AtResponse) -> AttemptFailure {
    match r {
        AtResponse::Error => AttemptFailure::Error,
        AtResponse::CmsError(code) => AttemptFailure::CmsError(code),
        other => AttemptFailure::Unexpected(other),
    }
}

/// One-shot helper: sends an SMS over `link` starting at virtual time `at`
/// with the retry policy from `cfg`. Returns the outcome and the virtual time
/// at which the exchange finished.
pub fn send_sms_with_retry<L: Link>(
    link: L,
    at: u64,
    to: &PhoneNumber,
    body: &str,
    cfg: &Config,
) -> Result<(SmsOutcome, u64, L), LinkError> {
    let mut client = ModemClient::new(link);
    client.advance_to(at);
    let outcome = client.send_sms(to, body, RetryPolicy::from_config(cfg))?;
    let done = client.now();
    Ok((outcome, done, client.into_link()))
}
