//! GSM text-mode link: AT command encoding, response parsing, the emulated
//! modem, and the transports between them.

pub mod link;
pub mod modem;
pub mod response;
pub mod server;
pub mod text;

pub use link::{
    send_sms_with_retry, AttemptFailure, CallOutcome, InProcLink, Link, LinkError, ModemClient,
    RetryPolicy, SmsOutcome, TcpLink,
};
pub use modem::{
    modem_step, parse_fault_plan, CommandKind, FaultBehavior, FaultRule, FaultSpec, LogKind,
    ModemEmulator, ModemState, NetworkLogEntry, Session,
};
pub use response::{parse_response, AtResponse, MalformedResponse, Parsed};
pub use text::{encode_dial, encode_sms, AtCommand, EncodeError, Frame};
