//! Transport-agnostic client session: join handshake, turning typed input
//! into frames, applying server frames, and answering heartbeats.

mod net;

use std::fmt;

use crate::protocol::{
    decode_bytes, parse_user_input, Body, ClientCommand, ErrorCode, InputError, LeaveReason, MemberEntry, MemberId,
    Timestamp, WireFrame, MEMBER_DETAILS_COMMAND,
};

pub use net::{
    connect_and_join, connect_and_join_with_timeout, ClientConnection, Incoming, JoinError, HANDSHAKE_TIMEOUT,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientPhase {
    Connecting,
    Joining(MemberId),
    Active { own_id: MemberId, coordinator: MemberId },
    Closed(DisconnectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisconnectReason {
    Quit,
    /// The server refused the join.
    Rejected(ErrorCode),
    ProtocolError,
    ConnectionLost,
    Timeout,
}

impl DisconnectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DisconnectReason::Quit => "quit",
            DisconnectReason::Rejected(code) => code.as_str(),
            DisconnectReason::ProtocolError => "protocol_error",
            DisconnectReason::ConnectionLost => "connection_lost",
            DisconnectReason::Timeout => "timeout",
        }
    }
}

impl fmt::Display for DisconnectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Public,
    Private,
}

/// Source of an [`ClientEvent::Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// `ERR` from the server.
    Server(ErrorCode),
    /// Input refused locally; nothing was sent.
    Input(InputError),
    /// Input submitted while not joined.
    NotActive,
}

impl Fault {
    pub fn code(self) -> &'static str {
        match self {
            Fault::Server(code) => code.as_str(),
            Fault::Input(e) => e.code(),
            Fault::NotActive => "not_active",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientEvent {
    Joined { own_id: MemberId, coordinator: MemberId },
    PeerJoined(MemberId),
    PeerLeft(MemberId, LeaveReason),
    NewCoordinator(MemberId),
    Message { ts: Timestamp, from: MemberId, body: Body, kind: MessageKind },
    Roster(Vec<MemberEntry>),
    Error { fault: Fault, text: String },
    Disconnected(DisconnectReason),
}

/// Outcome of [`ClientSession::submit_input`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submission {
    Send(WireFrame),
    /// Handled locally; nothing goes on the wire.
    Local(ClientEvent),
}

/// Outcome of applying one server frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Applied {
    pub events: Vec<ClientEvent>,
    /// Sent back without user involvement (heartbeat answers).
    pub reply: Option<WireFrame>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientSession {
    phase: ClientPhase,
    roster: Option<Vec<MemberEntry>>,
}

impl Default for ClientSession {
    fn default() -> Self {
        Self::new()
    }
}

impl ClientSession {
    pub fn new() -> Self {
        ClientSession { phase: ClientPhase::Connecting, roster: None }
    }

    pub fn phase(&self) -> &ClientPhase {
        &self.phase
    }

    pub fn roster(&self) -> Option<&[MemberEntry]> {
        self.roster.as_deref()
    }

    pub fn coordinator(&self) -> Option<&MemberId> {
        match &self.phase {
            ClientPhase::Active { coordinator, .. } => Some(coordinator),
            _ => None,
        }
    }

    pub fn own_id(&self) -> Option<&MemberId> {
        match &self.phase {
            ClientPhase::Active { own_id, .. } => Some(own_id),
            _ => None,
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self.phase, ClientPhase::Active { .. })
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.phase, ClientPhase::Closed(_))
    }

    /// The JOIN frame that opens the handshake.
    pub fn begin_join(&mut self, id: MemberId) -> WireFrame {
        self.phase = ClientPhase::Joining(id.clone());
        WireFrame::Join { id }
    }

    pub fn submit_input(&mut self, text: &str) -> Submission {
        if !self.is_active() {
            return Submission::Local(ClientEvent::Error {
                fault: Fault::NotActive,
                text: "not connected to a group".into(),
            });
        }
        let command = match parse_user_input(text) {
            Ok(command) => command,
            Err(e) => return Submission::Local(ClientEvent::Error { fault: Fault::Input(e), text: e.to_string() }),
        };
        let frame = match command {
            ClientCommand::Broadcast(body) => WireFrame::Msg { body },
            ClientCommand::Private { target, body } => WireFrame::Priv { target, body },
            // Sent as-is even when `target` is not the coordinator we know
            // of; the server has the final say.
            ClientCommand::DetailsRequest(target) => {
                WireFrame::Priv { target, body: Body::new(MEMBER_DETAILS_COMMAND).expect("constant is a valid body") }
            }
            ClientCommand::Quit => {
                self.phase = ClientPhase::Closed(DisconnectReason::Quit);
                WireFrame::Quit
            }
        };
        Submission::Send(frame)
    }

    /// Applies one raw line from the server. Undecodable input ends the
    /// session.
    pub fn apply_line(&mut self, line: &[u8]) -> Applied {
        if self.is_closed() {
            return Applied::default();
        }
        match decode_bytes(line) {
            Ok(frame) => self.apply_server_frame(frame),
            Err(_) => self.close(DisconnectReason::ProtocolError),
        }
    }

    pub fn apply_server_frame(&mut self, frame: WireFrame) -> Applied {
        let mut applied = Applied::default();
        let event = match (&mut self.phase, frame) {
            (ClientPhase::Closed(_), _) => return applied,
            (ClientPhase::Connecting, _) => return self.close(DisconnectReason::ProtocolError),
            (_, WireFrame::Ping { nonce }) => {
                applied.reply = Some(WireFrame::Pong { nonce });
                return applied;
            }
            (ClientPhase::Joining(proposed), WireFrame::Welcome { own_id, coordinator }) if *proposed == own_id => {
                self.phase = ClientPhase::Active { own_id: own_id.clone(), coordinator: coordinator.clone() };
                ClientEvent::Joined { own_id, coordinator }
            }
            (ClientPhase::Joining(_), WireFrame::Err { code: ErrorCode::DuplicateId, text }) => {
                self.phase = ClientPhase::Closed(DisconnectReason::Rejected(ErrorCode::DuplicateId));
                applied
                    .events
                    .push(ClientEvent::Error { fault: Fault::Server(ErrorCode::DuplicateId), text: text.into() });
                ClientEvent::Disconnected(DisconnectReason::Rejected(ErrorCode::DuplicateId))
            }
            (_, WireFrame::Err { code, text }) => ClientEvent::Error { fault: Fault::Server(code), text: text.into() },
            (ClientPhase::Active { .. }, WireFrame::Joined { id, .. }) => ClientEvent::PeerJoined(id),
            (ClientPhase::Active { .. }, WireFrame::Left { id, reason }) => ClientEvent::PeerLeft(id, reason),
            (ClientPhase::Active { coordinator, .. }, WireFrame::Coord { id }) => {
                *coordinator = id.clone();
                ClientEvent::NewCoordinator(id)
            }
            (ClientPhase::Active { .. }, WireFrame::Bcast { ts, from, body }) => {
                ClientEvent::Message { ts, from, body, kind: MessageKind::Public }
            }
            (ClientPhase::Active { .. }, WireFrame::Privmsg { ts, from, body }) => {
                ClientEvent::Message { ts, from, body, kind: MessageKind::Private }
            }
            (ClientPhase::Active { .. }, WireFrame::Members { entries }) => {
                self.roster = Some(entries.clone());
                ClientEvent::Roster(entries)
            }
            // Client verbs, or server verbs out of order.
            _ => return self.close(DisconnectReason::ProtocolError),
        };
        applied.events.push(event);
        applied
    }

    /// The transport ended. Emits `Disconnected` unless the session had
    /// already closed.
    pub fn connection_lost(&mut self) -> Applied {
        if self.is_closed() {
            return Applied::default();
        }
        self.close(DisconnectReason::ConnectionLost)
    }

    /// Ends the session locally, e.g. on a handshake timeout.
    pub fn close(&mut self, reason: DisconnectReason) -> Applied {
        if self.is_closed() {
            return Applied::default();
        }
        self.phase = ClientPhase::Closed(reason);
        Applied { events: vec![ClientEvent::Disconnected(reason)], reply: None }
    }
}
