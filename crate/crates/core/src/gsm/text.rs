//! Text-mode AT commands issued by the controller side.

use std::fmt;

use thiserror::Error;

use crate::config::{validate_phone, PhoneNumber};

pub const SMS_MAX_CHARS: usize = 160;
pub const CTRL_Z: u8 = 0x1A;
pub const ESC: u8 = 0x1B;
pub const CR: u8 = 0x0D;
pub const LF: u8 = 0x0A;
/// Longest accepted command line, terminator included.
pub const MAX_COMMAND_LEN: usize = 356;

/// Characters allowed in a text-mode SMS body: printable ASCII. 0x1A is
/// excluded since it terminates the body frame.
pub fn is_sms_char(c: char) -> bool {
    matches!(c, ' '..='~')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("message body is {0} characters, the limit is 160")]
    BodyTooLong(usize),
    #[error("character {ch:?} at position {position} is outside the text-mode character set")]
    IllegalCharacter { position: usize, ch: char },
}

pub fn check_sms_body(body: &str) -> Result<(), EncodeError> {
    if let Some((position, ch)) = body.chars().enumerate().find(|(_, c)| !is_sms_char(*c)) {
        return Err(EncodeError::IllegalCharacter { position, ch });
    }
    let len = body.chars().count();
    if len > SMS_MAX_CHARS {
        return Err(EncodeError::BodyTooLong(len));
    }
    Ok(())
}

/// The command productions understood by the emulated modem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtCommand {
    Attention,
    Echo(bool),
    TextMode,
    SendSms(PhoneNumber),
    Dial(PhoneNumber),
    Hangup,
}

impl fmt::Display for AtCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtCommand::Attention => write!(f, "AT"),
            AtCommand::Echo(on) => write!(f, "ATE{}", u8::from(*on)),
            AtCommand::TextMode => write!(f, "AT+CMGF=1"),
            AtCommand::SendSms(to) => write!(f, "AT+CMGS=\"{to}\""),
            AtCommand::Dial(to) => write!(f, "ATD{to};"),
            AtCommand::Hangup => write!(f, "ATH"),
        }
    }
}

impl AtCommand {
    /// Parses one command line (terminator already stripped). Keywords are
    /// case-insensitive; anything outside the grammar yields `None`.
    pub fn parse(line: &[u8]) -> Option<AtCommand> {
        let line = std::str::from_utf8(line).ok()?.trim();
        let upper = line.to_ascii_uppercase();
        match upper.as_str() {
            "AT" => return Some(AtCommand::Attention),
            "ATE0" => return Some(AtCommand::Echo(false)),
            "ATE1" => return Some(AtCommand::Echo(true)),
            "AT+CMGF=1" => return Some(AtCommand::TextMode),
            "ATH" | "ATH0" => return Some(AtCommand::Hangup),
            _ => {}
        }
        if let Some(arg) = upper.strip_prefix("AT+CMGS=") {
            let number = arg.strip_prefix('"')?.strip_suffix('"')?;
            return validate_phone(number).ok().map(AtCommand::SendSms);
        }
        if let Some(arg) = upper.strip_prefix("ATD") {
            // Voice calls only: the trailing semicolon is mandatory.
            let number = arg.strip_suffix(';')?;
            return validate_phone(number).ok().map(AtCommand::Dial);
        }
        None
    }

    pub fn to_frame(&self) -> Frame {
        Frame::Line(self.to_string().into_bytes())
    }
}

/// One unit written to the modem: a command line or an SMS body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// Command line without its CR terminator.
    Line(Vec<u8>),
    /// SMS body without its Ctrl-Z terminator.
    Body(Vec<u8>),
}

impl Frame {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Frame::Line(l) => {
                let mut b = l.clone();
                b.push(CR);
                b
            }
            Frame::Body(body) => {
                let mut b = body.clone();
                b.push(CTRL_Z);
                b
            }
        }
    }
}

/// Frames for one text-mode SMS submission: mode select, recipient header,
/// then the body. The body frame is only written after the modem's prompt.
pub fn encode_sms(to: &PhoneNumber, body: &str) -> Result<Vec<Frame>, EncodeError> {
    check_sms_body(body)?;
    Ok(vec![
        AtCommand::TextMode.to_frame(),
        AtCommand::SendSms(to.clone()).to_frame(),
        Frame::Body(body.as_bytes().to_vec()),
    ])
}

pub fn encode_dial(to: &PhoneNumber) -> Frame {
    AtCommand::Dial(to.clone()).to_frame()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phone(s: &str) -> PhoneNumber {
        validate_phone(s).unwrap()
    }

    #[test]
    fn sms_frames_are_bit_exact() {
        let frames = encode_sms(&phone("+233244000001"), "FIRE at Market Circle, Takoradi").unwrap();
        let bytes: Vec<Vec<u8>> = frames.iter().map(Frame::to_bytes).collect();
        assert_eq!(bytes[0], b"AT+CMGF=1\r");
        assert_eq!(bytes[1], b"AT+CMGS=\"+233244000001\"\r");
        assert_eq!(bytes[2], b"FIRE at Market Circle, Takoradi\x1a");
    }

    #[test]
    fn body_limits() {
        let to = phone("+233302000001");
        assert_eq!(encode_sms(&to, &"a".repeat(161)), Err(EncodeError::BodyTooLong(161)));
        assert!(encode_sms(&to, &"a".repeat(160)).is_ok());
        let frames = encode_sms(&to, "").unwrap();
        assert_eq!(frames[2].to_bytes(), vec![CTRL_Z]);
        assert_eq!(
            encode_sms(&to, "ab\x1acd"),
            Err(EncodeError::IllegalCharacter { position: 2, ch: '\x1a' })
        );
        assert_eq!(
            encode_sms(&to, "naïve"),
            Err(EncodeError::IllegalCharacter { position: 2, ch: 'ï' })
        );
    }

    #[test]
    fn dial_uses_voice_form() {
        assert_eq!(encode_dial(&phone("+233244000001")).to_bytes(), b"ATD+233244000001;\r");
        assert_eq!(encode_dial(&phone("+233302000001")).to_bytes(), b"ATD+233302000001;\r");
    }

    #[test]
    fn command_grammar() {
        assert_eq!(AtCommand::parse(b"AT"), Some(AtCommand::Attention));
        assert_eq!(AtCommand::parse(b"at"), Some(AtCommand::Attention));
        assert_eq!(AtCommand::parse(b"ATE1"), Some(AtCommand::Echo(true)));
        assert_eq!(AtCommand::parse(b"AT+CMGF=1"), Some(AtCommand::TextMode));
        assert_eq!(AtCommand::parse(b"AT+CMGF=0"), None);
        assert_eq!(
            AtCommand::parse(b"AT+CMGS=\"+233244000001\""),
            Some(AtCommand::SendSms(phone("+233244000001")))
        );
        assert_eq!(AtCommand::parse(b"AT+CMGS=+233244000001"), None);
        assert_eq!(
            AtCommand::parse(b"ATD+233244000001;"),
            Some(AtCommand::Dial(phone("+233244000001")))
        );
        assert_eq!(AtCommand::parse(b"ATD+233244000001"), None);
        assert_eq!(AtCommand::parse(b"AT+BOGUS"), None);
        assert_eq!(AtCommand::parse(&[0xff, 0xfe]), None);
        for cmd in [
            AtCommand::Attention,
            AtCommand::Echo(false),
            AtCommand::TextMode,
            AtCommand::SendSms(phone("+12345678")),
            AtCommand::Dial(phone("+12345678")),
            AtCommand::Hangup,
        ] {
            assert_eq!(AtCommand::parse(cmd.to_string().as_bytes()), Some(cmd));
        }
    }
}
