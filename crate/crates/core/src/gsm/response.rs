//! Incremental parser for modem responses.
//!
//! Responses are CRLF-framed lines (`\r\nOK\r\n`, `\r\n+CMGS: 7\r\n`, ...)
//! plus the SMS body prompt `> `, which arrives with or without a leading
//! CRLF and has no terminator of its own.

use thiserror::Error;

use super::text::{CR, LF};

// A response line longer than this cannot belong to the grammar.
const MAX_LINE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtResponse {
    Ok,
    Error,
    CmsError(u16),
    Prompt,
    CmgsAck(u8),
    Ring,
    NoCarrier,
}

impl AtResponse {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            AtResponse::Prompt => b"\r\n> ".to_vec(),
            other => format!("\r\n{}\r\n", other.line()).into_bytes(),
        }
    }

    fn line(&self) -> String {
        match self {
            AtResponse::Ok => "OK".into(),
            AtResponse::Error => "ERROR".into(),
            AtResponse::CmsError(code) => format!("+CMS ERROR: {code}"),
            AtResponse::Prompt => "> ".into(),
            AtResponse::CmgsAck(r) => format!("+CMGS: {r}"),
            AtResponse::Ring => "RING".into(),
            AtResponse::NoCarrier => "NO CARRIER".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parsed {
    /// One response unit and the number of bytes it occupied.
    Complete(AtResponse, usize),
    NeedMoreData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed modem response at byte {offset}")]
pub struct MalformedResponse {
    pub offset: usize,
}

fn malformed(offset: usize) -> Result<Parsed, MalformedResponse> {
    Err(MalformedResponse { offset })
}

fn number(digits: &str, max: u32) -> Option<u32> {
    if digits.is_empty() || digits.len() > 3 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|n| *n <= max)
}

fn classify(line: &str) -> Option<AtResponse> {
    match line {
        "OK" => return Some(AtResponse::Ok),
        "ERROR" => return Some(AtResponse::Error),
        "RING" => return Some(AtResponse::Ring),
        "NO CARRIER" => return Some(AtResponse::NoCarrier),
        _ => {}
    }
    if let Some(code) = line.strip_prefix("+CMS ERROR: ") {
        return number(code, 999).map(|c| AtResponse::CmsError(c as u16));
    }
    if let Some(r) = line.strip_prefix("+CMGS: ") {
        return number(r, 255).map(|r| AtResponse::CmgsAck(r as u8));
    }
    None
}

/// Parses the first response unit in `buf`.
pub fn parse_response(buf: &[u8]) -> Result<Parsed, MalformedResponse> {
    let Some(&first) = buf.first() else {
        return Ok(Parsed::NeedMoreData);
    };
    if first == b'>' {
        return match buf.get(1) {
            None => Ok(Parsed::NeedMoreData),
            Some(b' ') => Ok(Parsed::Complete(AtResponse::Prompt, 2)),
            Some(_) => malformed(1),
        };
    }
    if first != CR {
        return malformed(0);
    }
    match buf.get(1) {
        None => return Ok(Parsed::NeedMoreData),
        Some(&LF) => {}
        Some(_) => return malformed(1),
    }
    if buf.get(2) == Some(&b'>') {
        return match buf.get(3) {
            None => Ok(Parsed::NeedMoreData),
            Some(b' ') => Ok(Parsed::Complete(AtResponse::Prompt, 4)),
            Some(_) => malformed(3),
        };
    }

    let body = &buf[2..];
    for (i, &b) in body.iter().enumerate() {
        let offset = 2 + i;
        if b == CR {
            match body.get(i + 1) {
                None => return Ok(Parsed::NeedMoreData),
                Some(&LF) => {
                    // Bytes are printable ASCII at this point.
                    let line = std::str::from_utf8(&body[..i]).unwrap_or_default();
                    return match classify(line) {
                        Some(r) => Ok(Parsed::Complete(r, offset + 2)),
                        None => malformed(2),
                    };
                }
                Some(_) => return malformed(offset + 1),
            }
        }
        if !(0x20..=0x7e).contains(&b) || i >= MAX_LINE {
            return malformed(offset);
        }
    }
    Ok(Parsed::NeedMoreData)
}
