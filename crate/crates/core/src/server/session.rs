//! Per-connection state and the pure transition functions of the router.
//!
//! Nothing here touches a socket or a clock: each function takes the current
//! session, the registry and the time, and returns the next session plus an
//! [`Effects`] value describing what to send, what to log, and whether to
//! close the connection.

use std::net::{Ipv4Addr, SocketAddrV4};

use crate::protocol::{BadFrame, Body, ErrorCode, LeaveReason, MemberId, Timestamp, WireFrame, MEMBER_DETAILS_COMMAND};
use crate::registry::{Registry, RegistryError};

use super::log::LogEntry;

/// Consecutive undecodable frames tolerated before the connection is dropped.
pub const MAX_BAD_FRAMES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    AwaitingJoin,
    Joined(MemberId),
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub phase: Phase,
    pub peer_ip: Ipv4Addr,
    pub peer_port: u16,
    /// Heartbeat sweeps since the last matching PONG.
    pub missed_pings: u32,
    pub last_nonce: Option<u64>,
    /// Consecutive frames rejected as malformed.
    pub bad_frames: u32,
}

impl SessionState {
    pub fn new(peer_ip: Ipv4Addr, peer_port: u16) -> Self {
        SessionState {
            phase: Phase::AwaitingJoin,
            peer_ip,
            peer_port,
            missed_pings: 0,
            last_nonce: None,
            bad_frames: 0,
        }
    }

    pub fn peer(&self) -> SocketAddrV4 {
        SocketAddrV4::new(self.peer_ip, self.peer_port)
    }

    pub fn member_id(&self) -> Option<&MemberId> {
        match &self.phase {
            Phase::Joined(id) => Some(id),
            _ => None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }
}

/// Where an outbound frame goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    /// The connection that caused the event.
    Origin,
    Member(MemberId),
    /// Every member of the resulting registry, in join order.
    AllMembers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloseReason {
    Quit,
    DuplicateId,
    TooManyBadFrames,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effects {
    pub outbound: Vec<(Destination, WireFrame)>,
    pub registry: Registry,
    pub logs: Vec<LogEntry>,
    /// Set when the originating connection must be closed once `outbound`
    /// has been written.
    pub close: Option<CloseReason>,
}

impl Effects {
    fn unchanged(registry: &Registry) -> Self {
        Effects { outbound: Vec::new(), registry: registry.clone(), logs: Vec::new(), close: None }
    }

    fn send(&mut self, to: Destination, frame: WireFrame) {
        self.outbound.push((to, frame));
    }

    fn reply_error(&mut self, session: &SessionState, now: Timestamp, code: ErrorCode, text: &str) {
        self.send(Destination::Origin, WireFrame::err(code, text));
        self.logs.push(LogEntry::error(now, session.peer(), code, text));
    }
}

/// Routes one decoded frame from a client.
pub fn handle_frame(
    session: &SessionState,
    frame: WireFrame,
    registry: &Registry,
    now: Timestamp,
) -> (SessionState, Effects) {
    let mut next = session.clone();
    let mut fx = Effects::unchanged(registry);

    if session.is_closed() {
        return (next, fx);
    }
    if !frame.is_client_frame() {
        return handle_bad_frame(session, &BadFrame::UnexpectedVerb(frame.verb()), registry, now);
    }
    next.bad_frames = 0;

    match (&session.phase, frame) {
        (_, WireFrame::Pong { nonce }) => {
            if session.last_nonce == Some(nonce) {
                next.missed_pings = 0;
            }
        }
        (Phase::AwaitingJoin, WireFrame::Join { id }) => {
            match registry.add_member(id.clone(), session.peer_ip, session.peer_port, now) {
                Ok(admission) => {
                    let coordinator =
                        admission.registry.coordinator().cloned().expect("registry with a member has a coordinator");
                    fx.logs.push(LogEntry::join(now, &admission.member));
                    fx.send(Destination::Origin, WireFrame::Welcome { own_id: id.clone(), coordinator });
                    let joined = WireFrame::Joined { id: id.clone(), ip: session.peer_ip, port: session.peer_port };
                    for other in admission.registry.members().iter().filter(|m| m.id != id) {
                        fx.send(Destination::Member(other.id.clone()), joined.clone());
                    }
                    if admission.became_coordinator {
                        fx.send(Destination::AllMembers, WireFrame::Coord { id: id.clone() });
                        fx.logs.push(LogEntry::coord_change(now, &id));
                    }
                    fx.registry = admission.registry;
                    next.phase = Phase::Joined(id);
                }
                Err(RegistryError::DuplicateId(id)) => {
                    fx.reply_error(session, now, ErrorCode::DuplicateId, &format!("id {id} is already in use"));
                    fx.close = Some(CloseReason::DuplicateId);
                    next.phase = Phase::Closed;
                }
                Err(other) => unreachable!("add_member only fails with DuplicateId, got {other}"),
            }
        }
        (Phase::AwaitingJoin, _) => {
            fx.reply_error(session, now, ErrorCode::NotJoined, "send JOIN <id> first");
        }
        (Phase::Joined(_), WireFrame::Join { .. }) => {
            fx.reply_error(session, now, ErrorCode::BadFrame, "already joined");
        }
        (Phase::Joined(me), WireFrame::Msg { body }) => {
            fx.logs.push(LogEntry::broadcast(now, me, body.len()));
            fx.send(Destination::AllMembers, WireFrame::Bcast { ts: now, from: me.clone(), body });
        }
        (Phase::Joined(me), WireFrame::Priv { target, body }) => {
            route_private(session, me, target, body, registry, now, &mut fx);
        }
        (Phase::Joined(me), WireFrame::Quit) => {
            fx = departure_effects(me, LeaveReason::Quit, registry, now);
            fx.close = Some(CloseReason::Quit);
            next.phase = Phase::Closed;
        }
        (Phase::Joined(_), frame) => unreachable!("client frame {} not covered", frame.verb()),
        (Phase::Closed, _) => unreachable!("closed sessions return early"),
    }
    (next, fx)
}

fn route_private(
    session: &SessionState,
    me: &MemberId,
    target: MemberId,
    body: Body,
    registry: &Registry,
    now: Timestamp,
    fx: &mut Effects,
) {
    if body.as_str() == MEMBER_DETAILS_COMMAND {
        match registry.coordinator() {
            Some(coordinator) if *coordinator == target => {
                let entries = registry.member_details();
                fx.logs.push(LogEntry::details(now, me, coordinator, entries.len()));
                fx.send(Destination::Origin, WireFrame::Members { entries });
            }
            _ => fx.reply_error(session, now, ErrorCode::NotCoordinator, &format!("{target} is not the coordinator")),
        }
        return;
    }
    match registry.resolve_target(&target) {
        Ok(member) => {
            fx.logs.push(LogEntry::private(now, me, &member.id, body.len()));
            fx.send(Destination::Member(member.id.clone()), WireFrame::Privmsg { ts: now, from: me.clone(), body });
        }
        Err(_) => fx.reply_error(session, now, ErrorCode::UnknownTarget, &format!("no member named {target}")),
    }
}

/// Answers a line that failed to decode. Repeated failures close the
/// connection, with the same consequences as a transport error.
pub fn handle_bad_frame(
    session: &SessionState,
    reason: &BadFrame,
    registry: &Registry,
    now: Timestamp,
) -> (SessionState, Effects) {
    let mut next = session.clone();
    if session.is_closed() {
        return (next, Effects::unchanged(registry));
    }
    next.bad_frames += 1;
    let mut fx = Effects::unchanged(registry);
    fx.reply_error(session, now, ErrorCode::BadFrame, &reason.to_string());
    if next.bad_frames >= MAX_BAD_FRAMES {
        let gone = on_disconnect(&next, registry, LeaveReason::Error, now);
        fx.outbound.extend(gone.outbound);
        fx.logs.extend(gone.logs);
        fx.registry = gone.registry;
        fx.close = Some(CloseReason::TooManyBadFrames);
        next.phase = Phase::Closed;
    }
    (next, fx)
}

/// The connection is gone without a QUIT: transport EOF or reset
/// (`LeaveReason::Error`), or condemned by the heartbeat sweep
/// (`LeaveReason::Timeout`).
pub fn on_disconnect(session: &SessionState, registry: &Registry, reason: LeaveReason, now: Timestamp) -> Effects {
    match &session.phase {
        Phase::Joined(id) => departure_effects(id, reason, registry, now),
        Phase::AwaitingJoin => {
            let mut fx = Effects::unchanged(registry);
            fx.logs.push(LogEntry::abandoned(now, session.peer()));
            fx
        }
        Phase::Closed => Effects::unchanged(registry),
    }
}

fn departure_effects(id: &MemberId, reason: LeaveReason, registry: &Registry, now: Timestamp) -> Effects {
    let Ok(departure) = registry.remove_member(id, reason) else {
        return Effects::unchanged(registry);
    };
    let mut fx = Effects::unchanged(&departure.registry);
    fx.logs.push(LogEntry::leave(now, id, reason));
    fx.send(Destination::AllMembers, WireFrame::Left { id: id.clone(), reason });
    if let Some(successor) = departure.new_coordinator {
        fx.logs.push(LogEntry::coord_change(now, &successor));
        fx.send(Destination::AllMembers, WireFrame::Coord { id: successor });
    }
    fx
}

/// Monotone nonce generator for PING frames.
#[derive(Debug, Clone, Default)]
pub struct Nonces(u64);

impl Nonces {
    pub fn starting_at(first: u64) -> Self {
        Nonces(first)
    }

    pub fn next_nonce(&mut self) -> u64 {
        let n = self.0;
        self.0 = self.0.wrapping_add(1);
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAction {
    Ping(WireFrame),
    /// Too many sweeps passed without a matching PONG.
    Condemn {
        missed: u32,
    },
}

/// One heartbeat round over every joined session.
///
/// Each sweep counts as a miss until a PONG carrying the latest nonce resets
/// the counter. A session whose count exceeds `tolerated_misses` is condemned
/// instead of pinged, so a silent member is caught on the
/// `tolerated_misses + 1`-th sweep after its last PONG.
pub fn heartbeat_sweep<'a, K>(
    sessions: impl IntoIterator<Item = (K, &'a mut SessionState)>,
    tolerated_misses: u32,
    nonces: &mut Nonces,
) -> Vec<(K, SweepAction)> {
    let mut actions = Vec::new();
    for (key, session) in sessions {
        if session.member_id().is_none() {
            continue;
        }
        session.missed_pings += 1;
        if session.missed_pings > tolerated_misses {
            actions.push((key, SweepAction::Condemn { missed: session.missed_pings }));
        } else {
            let nonce = nonces.next_nonce();
            session.last_nonce = Some(nonce);
            actions.push((key, SweepAction::Ping(WireFrame::Ping { nonce })));
        }
    }
    actions
}
