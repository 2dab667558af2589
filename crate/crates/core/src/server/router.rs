use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::net::SocketAddrV4;

use crate::protocol::{BadFrame, LeaveReason, MemberId, Timestamp, WireFrame};
use crate::registry::Registry;

use super::log::LogEntry;
use super::session::{self, Destination, Effects, Nonces, SessionState, SweepAction};

/// Server-side handle for one transport connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnId(pub u64);

impl fmt::Display for ConnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "conn#{}", self.0)
    }
}

/// Concrete work produced by one routed event, with destinations resolved
/// to connections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dispatch {
    /// Log entries; write these before any frame goes out.
    pub logs: Vec<LogEntry>,
    /// Frames in send order.
    pub sends: Vec<(ConnId, WireFrame)>,
    /// Connections to close after their pending sends.
    pub closes: Vec<ConnId>,
}

impl Dispatch {
    fn merge(&mut self, other: Dispatch) {
        self.logs.extend(other.logs);
        self.sends.extend(other.sends);
        self.closes.extend(other.closes);
    }
}

/// The single routing sequencer.
///
/// Owns the registry and every session; all membership changes and frame
/// routing go through here one event at a time, which gives every recipient
/// the same relative order of deliveries. Transports only feed it events and
/// carry out the returned [`Dispatch`].
#[derive(Debug)]
pub struct Router {
    registry: Registry,
    sessions: BTreeMap<ConnId, SessionState>,
    by_member: HashMap<MemberId, ConnId>,
    next_conn: u64,
    nonces: Nonces,
    tolerated_misses: u32,
}

impl Router {
    pub fn new(tolerated_misses: u32) -> Self {
        Router {
            registry: Registry::new(),
            sessions: BTreeMap::new(),
            by_member: HashMap::new(),
            next_conn: 0,
            nonces: Nonces::default(),
            tolerated_misses,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn session(&self, conn: ConnId) -> Option<&SessionState> {
        self.sessions.get(&conn)
    }

    pub fn connection_of(&self, id: &MemberId) -> Option<ConnId> {
        self.by_member.get(id).copied()
    }

    pub fn open_connections(&self) -> usize {
        self.sessions.len()
    }

    /// Registers a freshly accepted connection in `awaiting_join`.
    pub fn open(&mut self, peer: SocketAddrV4) -> ConnId {
        let conn = ConnId(self.next_conn);
        self.next_conn += 1;
        self.sessions.insert(conn, SessionState::new(*peer.ip(), peer.port()));
        conn
    }

    pub fn receive(&mut self, conn: ConnId, frame: WireFrame, now: Timestamp) -> Dispatch {
        let Some(current) = self.sessions.get(&conn) else {
            return Dispatch::default();
        };
        let (next, fx) = session::handle_frame(current, frame, &self.registry, now);
        self.apply(conn, next, fx)
    }

    pub fn reject(&mut self, conn: ConnId, reason: &BadFrame, now: Timestamp) -> Dispatch {
        let Some(current) = self.sessions.get(&conn) else {
            return Dispatch::default();
        };
        let (next, fx) = session::handle_bad_frame(current, reason, &self.registry, now);
        self.apply(conn, next, fx)
    }

    /// The transport reported EOF or a reset.
    pub fn disconnect(&mut self, conn: ConnId, now: Timestamp) -> Dispatch {
        self.drop_session(conn, LeaveReason::Error, now)
    }

    /// One heartbeat round: pings live members and removes condemned ones.
    pub fn sweep(&mut self, now: Timestamp) -> Dispatch {
        let actions = session::heartbeat_sweep(
            self.sessions.iter_mut().map(|(conn, s)| (*conn, s)),
            self.tolerated_misses,
            &mut self.nonces,
        );
        let mut out = Dispatch::default();
        for (conn, action) in actions {
            match action {
                SweepAction::Ping(frame) => out.sends.push((conn, frame)),
                SweepAction::Condemn { missed } => {
                    if let Some(id) = self.sessions.get(&conn).and_then(|s| s.member_id()) {
                        out.logs.push(LogEntry::ping_timeout(now, id, missed));
                    }
                    out.merge(self.drop_session(conn, LeaveReason::Timeout, now));
                }
            }
        }
        out
    }

    fn drop_session(&mut self, conn: ConnId, reason: LeaveReason, now: Timestamp) -> Dispatch {
        let Some(current) = self.sessions.get(&conn) else {
            return Dispatch::default();
        };
        let fx = session::on_disconnect(current, &self.registry, reason, now);
        let mut closed = current.clone();
        closed.phase = session::Phase::Closed;
        let mut out = self.apply(conn, closed, fx);
        if !out.closes.contains(&conn) {
            out.closes.push(conn);
        }
        out
    }

    fn apply(&mut self, conn: ConnId, next: SessionState, fx: Effects) -> Dispatch {
        let Effects { outbound, registry, logs, close } = fx;

        let previous = self.sessions.get(&conn).and_then(|s| s.member_id().cloned());
        if let Some(id) = next.member_id() {
            self.by_member.insert(id.clone(), conn);
        }
        if let (Some(id), None) = (&previous, next.member_id()) {
            self.by_member.remove(id);
        }
        self.registry = registry;

        let mut out = Dispatch { logs, ..Dispatch::default() };
        for (dest, frame) in outbound {
            match dest {
                Destination::Origin => out.sends.push((conn, frame)),
                Destination::Member(id) => {
                    if let Some(&to) = self.by_member.get(&id) {
                        out.sends.push((to, frame));
                    }
                }
                Destination::AllMembers => {
                    for member in self.registry.members() {
                        if let Some(&to) = self.by_member.get(&member.id) {
                            out.sends.push((to, frame.clone()));
                        }
                    }
                }
            }
        }

        if close.is_some() || next.is_closed() {
            self.sessions.remove(&conn);
            out.closes.push(conn);
        } else {
            self.sessions.insert(conn, next);
        }
        out
    }
}
