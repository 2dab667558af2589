use std::fmt::{self, Write as _};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{Body, ErrorCode, LeaveReason, MemberEntry, MemberId, Timestamp};

/// One protocol message, in either direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WireFrame {
    // client -> server
    Join {
        id: MemberId,
    },
    Msg {
        body: Body,
    },
    Priv {
        target: MemberId,
        body: Body,
    },
    Quit,
    Pong {
        #[serde(with = "nonce_as_string")]
        nonce: u64,
    },

    // server -> client
    Welcome {
        own_id: MemberId,
        coordinator: MemberId,
    },
    Joined {
        id: MemberId,
        ip: Ipv4Addr,
        port: u16,
    },
    Left {
        id: MemberId,
        reason: LeaveReason,
    },
    Coord {
        id: MemberId,
    },
    Bcast {
        ts: Timestamp,
        from: MemberId,
        body: Body,
    },
    Privmsg {
        ts: Timestamp,
        from: MemberId,
        body: Body,
    },
    Members {
        entries: Vec<MemberEntry>,
    },
    Err {
        code: ErrorCode,
        text: Body,
    },
    Ping {
        #[serde(with = "nonce_as_string")]
        nonce: u64,
    },
}

impl WireFrame {
    pub fn verb(&self) -> &'static str {
        match self {
            WireFrame::Join { .. } => "JOIN",
            WireFrame::Msg { .. } => "MSG",
            WireFrame::Priv { .. } => "PRIV",
            WireFrame::Quit => "QUIT",
            WireFrame::Pong { .. } => "PONG",
            WireFrame::Welcome { .. } => "WELCOME",
            WireFrame::Joined { .. } => "JOINED",
            WireFrame::Left { .. } => "LEFT",
            WireFrame::Coord { .. } => "COORD",
            WireFrame::Bcast { .. } => "BCAST",
            WireFrame::Privmsg { .. } => "PRIVMSG",
            WireFrame::Members { .. } => "MEMBERS",
            WireFrame::Err { .. } => "ERR",
            WireFrame::Ping { .. } => "PING",
        }
    }

    /// True for the verbs a client may send.
    pub fn is_client_frame(&self) -> bool {
        matches!(
            self,
            WireFrame::Join { .. }
                | WireFrame::Msg { .. }
                | WireFrame::Priv { .. }
                | WireFrame::Quit
                | WireFrame::Pong { .. }
        )
    }

    pub fn err(code: ErrorCode, text: &str) -> Self {
        WireFrame::Err {
            code,
            text: Body::new(text).unwrap_or_else(|_| Body::new(code.as_str()).expect("code is non-empty")),
        }
    }
}

/// The line without its terminator.
impl fmt::Display for WireFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb())?;
        match self {
            WireFrame::Join { id } | WireFrame::Coord { id } => write!(f, " {id}"),
            WireFrame::Msg { body } => write!(f, " {body}"),
            WireFrame::Priv { target, body } => write!(f, " {target} {body}"),
            WireFrame::Quit => Ok(()),
            WireFrame::Pong { nonce } | WireFrame::Ping { nonce } => write!(f, " {nonce}"),
            WireFrame::Welcome { own_id, coordinator } => write!(f, " {own_id} {coordinator}"),
            WireFrame::Joined { id, ip, port } => write!(f, " {id} {ip} {port}"),
            WireFrame::Left { id, reason } => write!(f, " {id} {reason}"),
            WireFrame::Bcast { ts, from, body } | WireFrame::Privmsg { ts, from, body } => {
                write!(f, " {ts} {from} {body}")
            }
            WireFrame::Members { entries } => {
                for (i, e) in entries.iter().enumerate() {
                    f.write_char(if i == 0 { ' ' } else { ';' })?;
                    write!(f, "{},{},{}", e.id, e.ip, e.port)?;
                }
                Ok(())
            }
            WireFrame::Err { code, text } => write!(f, " {code} {text}"),
        }
    }
}

/// Serializes a frame as one `\n`-terminated line.
pub fn encode_frame(frame: &WireFrame) -> String {
    let mut line = frame.to_string();
    line.push('\n');
    line
}

/// Why a line was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BadFrame {
    #[error("empty line")]
    Empty,
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
    #[error("{0} is not a client frame")]
    UnexpectedVerb(&'static str),
    #[error("missing {0}")]
    MissingField(&'static str),
    #[error("unexpected trailing data after {0}")]
    TrailingData(&'static str),
    #[error("invalid member id in {0}")]
    InvalidMemberId(&'static str),
    #[error("invalid number in {0}")]
    InvalidNumber(&'static str),
    #[error("invalid ipv4 address in {0}")]
    InvalidAddress(&'static str),
    #[error("invalid timestamp")]
    InvalidTimestamp,
    #[error("unknown leave reason {0:?}")]
    UnknownReason(String),
    #[error("unknown error code {0:?}")]
    UnknownErrorCode(String),
    #[error("body contains a line terminator")]
    LineBreakInBody,
    #[error("malformed member entry {0:?}")]
    MalformedEntry(String),
    #[error("line longer than {0} bytes")]
    TooLong(usize),
}

impl BadFrame {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            BadFrame::Empty => "empty",
            BadFrame::InvalidUtf8 => "invalid_utf8",
            BadFrame::UnknownVerb(_) => "unknown_verb",
            BadFrame::UnexpectedVerb(_) => "unexpected_verb",
            BadFrame::MissingField(_) => "missing_field",
            BadFrame::TrailingData(_) => "trailing_data",
            BadFrame::InvalidMemberId(_) => "invalid_member_id",
            BadFrame::InvalidNumber(_) => "invalid_number",
            BadFrame::InvalidAddress(_) => "invalid_address",
            BadFrame::InvalidTimestamp => "invalid_timestamp",
            BadFrame::UnknownReason(_) => "unknown_reason",
            BadFrame::UnknownErrorCode(_) => "unknown_error_code",
            BadFrame::LineBreakInBody => "line_break_in_body",
            BadFrame::MalformedEntry(_) => "malformed_entry",
            BadFrame::TooLong(_) => "too_long",
        }
    }
}

/// Decodes raw bytes of one line (terminator already stripped).
pub fn decode_bytes(line: &[u8]) -> Result<WireFrame, BadFrame> {
    let text = std::str::from_utf8(line).map_err(|_| BadFrame::InvalidUtf8)?;
    decode_frame(text)
}

/// Parses one line (terminator already stripped).
///
/// Accepts only the canonical encoding, so a successful decode always
/// re-encodes to exactly the input.
pub fn decode_frame(line: &str) -> Result<WireFrame, BadFrame> {
    if line.is_empty() {
        return Err(BadFrame::Empty);
    }
    let (verb, rest) = match line.split_once(' ') {
        Some((verb, rest)) => (verb, Some(rest)),
        None => (line, None),
    };
    let mut fields = Fields { rest };
    let frame = match verb {
        "JOIN" => WireFrame::Join { id: fields.member_id("id")? },
        "MSG" => WireFrame::Msg { body: fields.body()? },
        "PRIV" => WireFrame::Priv { target: fields.member_id("target")?, body: fields.body()? },
        "QUIT" => WireFrame::Quit,
        "PONG" => WireFrame::Pong { nonce: fields.number("nonce")? },
        "PING" => WireFrame::Ping { nonce: fields.number("nonce")? },
        "WELCOME" => {
            WireFrame::Welcome { own_id: fields.member_id("own id")?, coordinator: fields.member_id("coordinator")? }
        }
        "JOINED" => {
            WireFrame::Joined { id: fields.member_id("id")?, ip: fields.address("ip")?, port: fields.number("port")? }
        }
        "LEFT" => WireFrame::Left {
            id: fields.member_id("id")?,
            reason: {
                let raw = fields.token("reason")?;
                LeaveReason::parse(raw).ok_or_else(|| BadFrame::UnknownReason(raw.to_owned()))?
            },
        },
        "COORD" => WireFrame::Coord { id: fields.member_id("id")? },
        "BCAST" | "PRIVMSG" => {
            let ts = fields.timestamp()?;
            let from = fields.member_id("sender")?;
            let body = fields.body()?;
            if verb == "BCAST" {
                WireFrame::Bcast { ts, from, body }
            } else {
                WireFrame::Privmsg { ts, from, body }
            }
        }
        "MEMBERS" => WireFrame::Members { entries: fields.entries()? },
        "ERR" => WireFrame::Err {
            code: {
                let raw = fields.token("error code")?;
                ErrorCode::parse(raw).ok_or_else(|| BadFrame::UnknownErrorCode(raw.to_owned()))?
            },
            text: fields.body()?,
        },
        other => return Err(BadFrame::UnknownVerb(other.to_owned())),
    };
    match fields.rest {
        None => Ok(frame),
        Some(_) => Err(BadFrame::TrailingData(frame.verb())),
    }
}

/// Cursor over the space-separated fields after the verb.
///
/// `rest` is `None` once the line is exhausted; `Some("")` means a separator
/// was present with nothing after it, which no canonical encoding produces.
struct Fields<'a> {
    rest: Option<&'a str>,
}

impl<'a> Fields<'a> {
    fn token(&mut self, what: &'static str) -> Result<&'a str, BadFrame> {
        let rest = self.rest.ok_or(BadFrame::MissingField(what))?;
        let (tok, tail) = match rest.split_once(' ') {
            Some((tok, tail)) => (tok, Some(tail)),
            None => (rest, None),
        };
        if tok.is_empty() {
            return Err(BadFrame::MissingField(what));
        }
        self.rest = tail;
        Ok(tok)
    }

    fn member_id(&mut self, what: &'static str) -> Result<MemberId, BadFrame> {
        let tok = self.token(what)?;
        MemberId::new(tok).map_err(|_| BadFrame::InvalidMemberId(what))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &'static str) -> Result<T, BadFrame> {
        parse_canonical(self.token(what)?).ok_or(BadFrame::InvalidNumber(what))
    }

    fn address(&mut self, what: &'static str) -> Result<Ipv4Addr, BadFrame> {
        let tok = self.token(what)?;
        parse_ipv4(tok).ok_or(BadFrame::InvalidAddress(what))
    }

    fn timestamp(&mut self) -> Result<Timestamp, BadFrame> {
        let date = self.token("timestamp")?;
        let time = self.token("timestamp")?;
        format!("{date} {time}").parse().map_err(|_| BadFrame::InvalidTimestamp)
    }

    /// Everything left on the line.
    fn body(&mut self) -> Result<Body, BadFrame> {
        let rest = self.rest.take().ok_or(BadFrame::MissingField("body"))?;
        Body::new(rest).map_err(|e| match e {
            super::types::InvalidBody::Empty => BadFrame::MissingField("body"),
            super::types::InvalidBody::LineBreak => BadFrame::LineBreakInBody,
        })
    }

    fn entries(&mut self) -> Result<Vec<MemberEntry>, BadFrame> {
        let Some(rest) = self.rest.take() else {
            return Ok(Vec::new());
        };
        rest.split(';').map(parse_entry).collect()
    }
}

fn parse_entry(raw: &str) -> Result<MemberEntry, BadFrame> {
    let malformed = || BadFrame::MalformedEntry(raw.to_owned());
    let mut parts = raw.split(',');
    let (Some(id), Some(ip), Some(port), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(malformed());
    };
    Ok(MemberEntry {
        id: MemberId::new(id).map_err(|_| malformed())?,
        ip: parse_ipv4(ip).ok_or_else(malformed)?,
        port: parse_canonical(port).ok_or_else(malformed)?,
    })
}

/// Decimal digits only, no sign, no leading zeros.
fn parse_canonical<T: std::str::FromStr>(tok: &str) -> Option<T> {
    let digits_only = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit());
    let no_leading_zero = tok == "0" || !tok.starts_with('0');
    if digits_only && no_leading_zero {
        tok.parse().ok()
    } else {
        None
    }
}

fn parse_ipv4(tok: &str) -> Option<Ipv4Addr> {
    // std already refuses leading zeros in octets; the round-trip check
    // guards against any other non-canonical spelling.
    tok.parse::<Ipv4Addr>().ok().filter(|ip| ip.to_string() == tok)
}

mod nonce_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> MemberId {
        MemberId::new(s).unwrap()
    }

    fn body(s: &str) -> Body {
        Body::new(s).unwrap()
    }

    #[test]
    fn fieldless_verb() {
        assert_eq!(encode_frame(&WireFrame::Quit), "QUIT\n");
        assert_eq!(decode_frame("QUIT"), Ok(WireFrame::Quit));
        assert_eq!(decode_frame("QUIT now"), Err(BadFrame::TrailingData("QUIT")));
    }

    #[test]
    fn private_body_keeps_spaces() {
        let f = WireFrame::Priv { target: id("bob"), body: body("hello there") };
        assert_eq!(encode_frame(&f), "PRIV bob hello there\n");
        assert_eq!(decode_frame("PRIV bob hello there"), Ok(f));
    }

    #[test]
    fn members_list_layout() {
        let f = WireFrame::Members {
            entries: vec![
                MemberEntry::new(id("alice"), Ipv4Addr::LOCALHOST, 5001),
                MemberEntry::new(id("bob"), Ipv4Addr::LOCALHOST, 5002),
            ],
        };
        assert_eq!(encode_frame(&f), "MEMBERS alice,127.0.0.1,5001;bob,127.0.0.1,5002\n");
        assert_eq!(decode_frame("MEMBERS alice,127.0.0.1,5001;bob,127.0.0.1,5002"), Ok(f));
        assert_eq!(encode_frame(&WireFrame::Members { entries: vec![] }), "MEMBERS\n");
        assert_eq!(decode_frame("MEMBERS"), Ok(WireFrame::Members { entries: vec![] }));
    }

    #[test]
    fn arity_errors() {
        assert_eq!(decode_frame("JOIN"), Err(BadFrame::MissingField("id")));
        assert_eq!(decode_frame("JOIN "), Err(BadFrame::MissingField("id")));
        assert_eq!(decode_frame("PRIV bob"), Err(BadFrame::MissingField("body")));
        assert_eq!(decode_frame("PRIV bob "), Err(BadFrame::MissingField("body")));
        assert_eq!(decode_frame("MSG"), Err(BadFrame::MissingField("body")));
        assert_eq!(decode_frame("JOIN alice bob"), Err(BadFrame::TrailingData("JOIN")));
    }

    #[test]
    fn timestamped_frames() {
        let line = "BCAST 2024-03-01 10:00:00 alice hi all";
        let f = decode_frame(line).unwrap();
        assert_eq!(
            f,
            WireFrame::Bcast { ts: "2024-03-01 10:00:00".parse().unwrap(), from: id("alice"), body: body("hi all") }
        );
        assert_eq!(f.to_string(), line);
        assert_eq!(decode_frame("PRIVMSG 2024-03-01 alice hi"), Err(BadFrame::InvalidTimestamp));
    }

    #[test]
    fn non_canonical_numbers_rejected() {
        assert_eq!(decode_frame("PING 07"), Err(BadFrame::InvalidNumber("nonce")));
        assert_eq!(decode_frame("PING +7"), Err(BadFrame::InvalidNumber("nonce")));
        assert_eq!(decode_frame("PING 18446744073709551616"), Err(BadFrame::InvalidNumber("nonce")));
        assert_eq!(decode_frame("JOINED a 127.0.0.1 65536"), Err(BadFrame::InvalidNumber("port")));
        assert_eq!(decode_frame("JOINED a 127.0.0.01 1"), Err(BadFrame::InvalidAddress("ip")));
        assert!(decode_frame("PING 0").is_ok());
    }

    #[test]
    fn invalid_utf8_is_bad_frame() {
        assert_eq!(decode_bytes(b"MSG \xff\xfe"), Err(BadFrame::InvalidUtf8));
        assert_eq!(decode_bytes("MSG héllo".as_bytes()), Ok(WireFrame::Msg { body: body("héllo") }));
    }

    #[test]
    fn err_frame_helper_never_panics_on_empty_text() {
        assert_eq!(WireFrame::err(ErrorCode::NotJoined, "").to_string(), "ERR not_joined not_joined");
    }

    #[test]
    fn json_shape_uses_verb_tag() {
        let json = serde_json::to_string(&WireFrame::Ping { nonce: u64::MAX }).unwrap();
        assert_eq!(json, r#"{"verb":"PING","nonce":"18446744073709551615"}"#);
        let back: WireFrame = serde_json::from_str(&json).unwrap();
        assert_eq!(back, WireFrame::Ping { nonce: u64::MAX });
    }
}
