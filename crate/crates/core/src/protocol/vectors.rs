//! Golden wire vectors, exported for independent implementations of the
//! grammar (the browser console) and pinned by tests.

use serde::Serialize;

use super::frame::{decode_frame, WireFrame};

/// Lines every decoder must reject, with the expected [`BadFrame`] kind.
///
/// [`BadFrame`]: super::BadFrame
pub const MALFORMED_CORPUS: &[(&str, &str)] = &[
    ("", "empty"),
    ("join alice", "unknown_verb"),
    ("HELLO alice", "unknown_verb"),
    (" JOIN alice", "unknown_verb"),
    ("JOIN", "missing_field"),
    ("JOIN ", "missing_field"),
    ("JOIN alice bob", "trailing_data"),
    ("JOIN al ice", "trailing_data"),
    ("JOIN al!ce", "invalid_member_id"),
    ("JOIN abcdefghijklmnopqrstuvwxyz0123456", "invalid_member_id"),
    ("MSG", "missing_field"),
    ("MSG ", "missing_field"),
    ("PRIV bob", "missing_field"),
    ("PRIV bob ", "missing_field"),
    ("PRIV @bob hi", "invalid_member_id"),
    ("QUIT now", "trailing_data"),
    ("QUIT ", "trailing_data"),
    ("PONG", "missing_field"),
    ("PONG -1", "invalid_number"),
    ("PONG +1", "invalid_number"),
    ("PONG 007", "invalid_number"),
    ("PONG 18446744073709551616", "invalid_number"),
    ("PONG 1 2", "trailing_data"),
    ("PING x", "invalid_number"),
    ("WELCOME alice", "missing_field"),
    ("JOINED bob 127.0.0.1", "missing_field"),
    ("JOINED bob 127.0.0.01 5002", "invalid_address"),
    ("JOINED bob 256.0.0.1 5002", "invalid_address"),
    ("JOINED bob ::1 5002", "invalid_address"),
    ("JOINED bob 127.0.0.1 65536", "invalid_number"),
    ("JOINED bob 127.0.0.1 05002", "invalid_number"),
    ("LEFT bob vanished", "unknown_reason"),
    ("LEFT bob", "missing_field"),
    ("COORD", "missing_field"),
    ("BCAST 2024-03-01 alice hi", "invalid_timestamp"),
    ("BCAST 2024-3-01 10:00:00 alice hi", "invalid_timestamp"),
    ("BCAST 2024-02-30 10:00:00 alice hi", "invalid_timestamp"),
    ("BCAST 2024-03-01 24:00:00 alice hi", "invalid_timestamp"),
    ("BCAST 2024-03-01 10:00:60 alice hi", "invalid_timestamp"),
    ("BCAST 2024-03-01T10:00:00 alice hi", "invalid_timestamp"),
    ("BCAST 2024-03-01 10:00:00 alice", "missing_field"),
    ("PRIVMSG 2024-03-01 10:00:00 al.ice hi", "invalid_member_id"),
    ("MEMBERS ", "malformed_entry"),
    ("MEMBERS alice,127.0.0.1", "malformed_entry"),
    ("MEMBERS alice,127.0.0.1,5001,x", "malformed_entry"),
    ("MEMBERS alice,127.0.0.1,5001;", "malformed_entry"),
    ("MEMBERS alice,localhost,5001", "malformed_entry"),
    ("ERR oops something", "unknown_error_code"),
    ("ERR bad_frame", "missing_field"),
    ("MSG hi\rthere", "line_break_in_body"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidVector {
    /// Line without its `\n`.
    pub line: String,
    pub frame: WireFrame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvalidVector {
    pub line: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoldenVectors {
    pub valid: Vec<ValidVector>,
    pub invalid: Vec<InvalidVector>,
}

const VALID_LINES: &[&str] = &[
    "JOIN alice",
    "JOIN A_b-9",
    "JOIN abcdefghijklmnopqrstuvwxyz012345",
    "MSG hello",
    "MSG hello   spaced  out ",
    "MSG  leading space",
    "MSG caf\u{e9} \u{1f44b}",
    "PRIV bob hi",
    "PRIV bob /memberdetails",
    "PRIV bob see you at 5",
    "QUIT",
    "PONG 0",
    "PONG 18446744073709551615",
    "WELCOME alice alice",
    "WELCOME bob alice",
    "JOINED bob 127.0.0.1 5002",
    "JOINED carol 10.0.0.255 0",
    "LEFT bob quit",
    "LEFT bob timeout",
    "LEFT bob error",
    "COORD bob",
    "BCAST 2024-03-01 10:00:00 alice hello",
    "BCAST 1970-01-01 00:00:00 alice epoch",
    "BCAST 9999-12-31 23:59:59 alice last second",
    "PRIVMSG 2024-02-29 23:59:59 bob leap day",
    "MEMBERS",
    "MEMBERS alice,127.0.0.1,5001",
    "MEMBERS alice,127.0.0.1,5001;bob,127.0.0.1,5002;carol,192.168.1.20,65535",
    "ERR duplicate_id id alice is already taken",
    "ERR unknown_target no member named zed",
    "ERR not_coordinator bob is not the coordinator",
    "ERR bad_frame unknown verb",
    "ERR not_joined send JOIN first",
    "PING 7",
    "PING 18446744073709551615",
];

/// The exported vector set: valid lines with their decoded frames, then the
/// malformed corpus.
pub fn golden_vectors() -> GoldenVectors {
    let valid = VALID_LINES
        .iter()
        .map(|line| ValidVector {
            line: (*line).to_owned(),
            frame: decode_frame(line).unwrap_or_else(|e| panic!("golden line {line:?} rejected: {e}")),
        })
        .collect();
    let invalid = MALFORMED_CORPUS
        .iter()
        .map(|(line, error)| InvalidVector { line: (*line).to_owned(), error: (*error).to_owned() })
        .collect();
    GoldenVectors { valid, invalid }
}
