use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest accepted member id, in characters.
pub const MAX_MEMBER_ID_LEN: usize = 32;

/// A participant's self-chosen identifier, e.g. `alice` or `node-7`.
///
/// 1 to 32 characters from `A-Z a-z 0-9 _ -`; compared case-sensitively.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MemberId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid member id {0:?}: expected 1-32 characters from [A-Za-z0-9_-]")]
pub struct InvalidMemberId(pub String);

impl MemberId {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidMemberId> {
        let value = value.into();
        if Self::is_valid(&value) {
            Ok(MemberId(value))
        } else {
            Err(InvalidMemberId(value))
        }
    }

    pub fn is_valid(value: &str) -> bool {
        !value.is_empty()
            && value.len() <= MAX_MEMBER_ID_LEN
            && value.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for MemberId {
    type Err = InvalidMemberId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MemberId::new(s)
    }
}

impl TryFrom<String> for MemberId {
    type Error = InvalidMemberId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        MemberId::new(value)
    }
}

impl From<MemberId> for String {
    fn from(id: MemberId) -> String {
        id.0
    }
}

impl PartialEq<str> for MemberId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for MemberId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Free text carried as the last field of a frame.
///
/// Non-empty and free of line terminators (`\n`, `\r`), so it always fits on
/// one line. Internal and surrounding spaces are preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Body(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidBody {
    #[error("body is empty")]
    Empty,
    #[error("body contains a line terminator")]
    LineBreak,
}

impl Body {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidBody> {
        let value = value.into();
        if value.is_empty() {
            Err(InvalidBody::Empty)
        } else if value.contains(['\n', '\r']) {
            Err(InvalidBody::LineBreak)
        } else {
            Ok(Body(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Length in bytes, as reported in log lines.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Body {
    type Error = InvalidBody;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Body::new(value)
    }
}

impl TryFrom<&str> for Body {
    type Error = InvalidBody;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Body::new(value)
    }
}

impl From<Body> for String {
    fn from(body: Body) -> String {
        body.0
    }
}

impl PartialEq<&str> for Body {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// UTC wall-clock time at second resolution, rendered `YYYY-MM-DD HH:MM:SS`.
///
/// Only years 0000 through 9999 are representable, which keeps the rendering
/// fixed-width so that lexicographic and chronological order agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Timestamp(i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid timestamp {0:?}: expected YYYY-MM-DD HH:MM:SS")]
pub struct InvalidTimestamp(pub String);

impl Timestamp {
    /// 0000-01-01 00:00:00
    pub const MIN: Timestamp = Timestamp(-62_167_219_200);
    /// 9999-12-31 23:59:59
    pub const MAX: Timestamp = Timestamp(253_402_300_799);
    pub const EPOCH: Timestamp = Timestamp(0);

    /// Seconds since the Unix epoch, `None` when outside years 0000-9999.
    pub fn from_unix(secs: i64) -> Option<Self> {
        (Self::MIN.0..=Self::MAX.0).contains(&secs).then_some(Timestamp(secs))
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    /// Later by `secs`, clamped at [`Timestamp::MAX`].
    pub fn plus_secs(self, secs: u64) -> Self {
        let secs = i64::try_from(secs).unwrap_or(i64::MAX);
        Timestamp(self.0.saturating_add(secs).min(Self::MAX.0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Range is enforced at construction, so the conversion cannot fail.
        let dt = DateTime::from_timestamp(self.0, 0).expect("timestamp within chrono range");
        write!(f, "{}", dt.format("%Y-%m-%d %H:%M:%S"))
    }
}

impl FromStr for Timestamp {
    type Err = InvalidTimestamp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || InvalidTimestamp(s.to_owned());
        let b = s.as_bytes();
        if b.len() != 19 {
            return Err(invalid());
        }
        for (i, &c) in b.iter().enumerate() {
            let ok = match i {
                4 | 7 => c == b'-',
                10 => c == b' ',
                13 | 16 => c == b':',
                _ => c.is_ascii_digit(),
            };
            if !ok {
                return Err(invalid());
            }
        }
        let num = |range: std::ops::Range<usize>| -> u32 { s[range].parse().expect("digits checked above") };
        let date = NaiveDate::from_ymd_opt(num(0..4) as i32, num(5..7), num(8..10)).ok_or_else(invalid)?;
        // from_hms_opt rejects hour 24, minute 60 and leap second 60.
        let datetime = date.and_hms_opt(num(11..13), num(14..16), num(17..19)).ok_or_else(invalid)?;
        Timestamp::from_unix(datetime.and_utc().timestamp()).ok_or_else(invalid)
    }
}

impl TryFrom<String> for Timestamp {
    type Error = InvalidTimestamp;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Timestamp> for String {
    fn from(ts: Timestamp) -> String {
        ts.to_string()
    }
}

/// Renders a wall-clock reading as a [`Timestamp`], truncating sub-second
/// precision. Readings outside years 0000-9999 saturate at the range ends.
pub fn format_timestamp(instant: SystemTime) -> Timestamp {
    let secs = match instant.duration_since(UNIX_EPOCH) {
        Ok(after) => i64::try_from(after.as_secs()).unwrap_or(i64::MAX),
        Err(before) => {
            let d = before.duration();
            // -1.5 s is 1969-12-31 23:59:58.5, which truncates to :58.
            let whole = i64::try_from(d.as_secs()).unwrap_or(i64::MAX);
            let extra = i64::from(d.subsec_nanos() > 0);
            whole.saturating_add(extra).saturating_neg()
        }
    };
    Timestamp(secs.clamp(Timestamp::MIN.0, Timestamp::MAX.0))
}

/// Source of the current time, injectable so tests control every instant.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        format_timestamp(SystemTime::now())
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(AtomicI64::new(start.0))
    }

    pub fn set(&self, ts: Timestamp) {
        self.0.store(ts.0, Ordering::SeqCst);
    }

    pub fn advance(&self, by: Duration) {
        let next = self.now().plus_secs(by.as_secs());
        self.set(next);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}

/// Why a member left the group, as carried by `LEFT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaveReason {
    Quit,
    Timeout,
    Error,
}

impl LeaveReason {
    pub const ALL: [LeaveReason; 3] = [LeaveReason::Quit, LeaveReason::Timeout, LeaveReason::Error];

    pub fn as_str(self) -> &'static str {
        match self {
            LeaveReason::Quit => "quit",
            LeaveReason::Timeout => "timeout",
            LeaveReason::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for LeaveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Machine-readable code carried by `ERR`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    DuplicateId,
    UnknownTarget,
    NotCoordinator,
    BadFrame,
    NotJoined,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 5] = [
        ErrorCode::DuplicateId,
        ErrorCode::UnknownTarget,
        ErrorCode::NotCoordinator,
        ErrorCode::BadFrame,
        ErrorCode::NotJoined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::DuplicateId => "duplicate_id",
            ErrorCode::UnknownTarget => "unknown_target",
            ErrorCode::NotCoordinator => "not_coordinator",
            ErrorCode::BadFrame => "bad_frame",
            ErrorCode::NotJoined => "not_joined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the member-details roster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberEntry {
    pub id: MemberId,
    pub ip: Ipv4Addr,
    pub port: u16,
}

impl MemberEntry {
    pub fn new(id: MemberId, ip: Ipv4Addr, port: u16) -> Self {
        MemberEntry { id, ip, port }
    }
}
