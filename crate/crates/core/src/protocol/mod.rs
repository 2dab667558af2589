//! Line-oriented wire grammar shared by the server, the clients and the gateway.
//!
//! Every frame is one UTF-8 line terminated by `\n`. The verb comes first,
//! fixed fields follow separated by single spaces, and a free-text body (when
//! the verb has one) is always the last field so it may contain spaces.
//!
//! ```text
//! JOIN alice
//! PRIV bob see you at 5
//! BCAST 2024-03-01 10:00:00 alice hello
//! MEMBERS alice,127.0.0.1,5001;bob,127.0.0.1,5002
//! ```

mod frame;
mod input;
mod types;
mod vectors;

pub use frame::{decode_bytes, decode_frame, encode_frame, BadFrame, WireFrame};
pub use input::{parse_user_input, ClientCommand, InputError, MEMBER_DETAILS_COMMAND, QUIT_COMMAND};
pub use types::{
    format_timestamp, Body, Clock, ErrorCode, InvalidBody, InvalidMemberId, InvalidTimestamp, LeaveReason, ManualClock,
    MemberEntry, MemberId, SystemClock, Timestamp,
};
pub use vectors::{golden_vectors, GoldenVectors, InvalidVector, ValidVector, MALFORMED_CORPUS};
