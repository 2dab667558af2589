//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod scenario;

use std::net::Ipv4Addr;

use gcs::protocol::{Body, ErrorCode, LeaveReason, MemberEntry, MemberId, Timestamp, WireFrame};
use proptest::prelude::*;

pub fn id(s: &str) -> MemberId {
    MemberId::new(s).unwrap()
}

pub fn member_id() -> impl Strategy<Value = MemberId> {
    "[A-Za-z0-9_-]{1,32}".prop_map(|s| MemberId::new(s).unwrap())
}

pub fn body() -> impl Strategy<Value = Body> {
    prop_oneof!["[ -~]{1,60}", "[^\n\r]{1,40}", Just("/memberdetails".to_owned()),].prop_map(|s| Body::new(s).unwrap())
}

pub fn timestamp() -> impl Strategy<Value = Timestamp> {
    (Timestamp::MIN.unix()..=Timestamp::MAX.unix()).prop_map(|s| Timestamp::from_unix(s).unwrap())
}

pub fn ipv4() -> impl Strategy<Value = Ipv4Addr> {
    any::<[u8; 4]>().prop_map(Ipv4Addr::from)
}

pub fn entry() -> impl Strategy<Value = MemberEntry> {
    (member_id(), ipv4(), any::<u16>()).prop_map(|(id, ip, port)| MemberEntry::new(id, ip, port))
}

pub fn leave_reason() -> impl Strategy<Value = LeaveReason> {
    proptest::sample::select(LeaveReason::ALL.to_vec())
}

pub fn error_code() -> impl Strategy<Value = ErrorCode> {
    proptest::sample::select(ErrorCode::ALL.to_vec())
}

/// Any frame of either direction.
pub fn wire_frame() -> impl Strategy<Value = WireFrame> {
    prop_oneof![
        member_id().prop_map(|id| WireFrame::Join { id }),
        body().prop_map(|body| WireFrame::Msg { body }),
        (member_id(), body()).prop_map(|(target, body)| WireFrame::Priv { target, body }),
        Just(WireFrame::Quit),
        any::<u64>().prop_map(|nonce| WireFrame::Pong { nonce }),
        (member_id(), member_id()).prop_map(|(own_id, coordinator)| WireFrame::Welcome { own_id, coordinator }),
        (member_id(), ipv4(), any::<u16>()).prop_map(|(id, ip, port)| WireFrame::Joined { id, ip, port }),
        (member_id(), leave_reason()).prop_map(|(id, reason)| WireFrame::Left { id, reason }),
        member_id().prop_map(|id| WireFrame::Coord { id }),
        (timestamp(), member_id(), body()).prop_map(|(ts, from, body)| WireFrame::Bcast { ts, from, body }),
        (timestamp(), member_id(), body()).prop_map(|(ts, from, body)| WireFrame::Privmsg { ts, from, body }),
        proptest::collection::vec(entry(), 0..6).prop_map(|entries| WireFrame::Members { entries }),
        (error_code(), body()).prop_map(|(code, text)| WireFrame::Err { code, text }),
        any::<u64>().prop_map(|nonce| WireFrame::Ping { nonce }),
    ]
}

/// Days since 1970-01-01 for a proleptic Gregorian date (Hinnant's
/// `days_from_civil`).
pub fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

/// Inverse of [`days_from_civil`].
pub fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719468;
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// `YYYY-MM-DD HH:MM:SS` for unix seconds, computed without chrono.
pub fn oracle_format(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!("{y:04}-{m:02}-{d:02} {:02}:{:02}:{:02}", rem / 3600, rem % 3600 / 60, rem % 60)
}

/// Brute-force membership model: live members with their admission number.
/// The coordinator is recomputed from scratch as the minimum admission
/// number every time it is asked for.
#[derive(Debug, Default, Clone)]
pub struct OracleRegistry {
    live: Vec<(MemberId, u64)>,
    admitted: u64,
}

impl OracleRegistry {
    /// False when `id` is already live.
    pub fn join(&mut self, id: &MemberId) -> bool {
        if self.live.iter().any(|(m, _)| m == id) {
            return false;
        }
        self.live.push((id.clone(), self.admitted));
        self.admitted += 1;
        true
    }

    /// False when `id` is not live.
    pub fn leave(&mut self, id: &MemberId) -> bool {
        let before = self.live.len();
        self.live.retain(|(m, _)| m != id);
        before != self.live.len()
    }

    pub fn coordinator(&self) -> Option<MemberId> {
        self.live.iter().min_by_key(|(_, seq)| *seq).map(|(m, _)| m.clone())
    }

    /// Live ids sorted by admission number.
    pub fn order(&self) -> Vec<MemberId> {
        let mut live = self.live.clone();
        live.sort_by_key(|(_, seq)| *seq);
        live.into_iter().map(|(m, _)| m).collect()
    }
}

#[derive(Debug, Clone)]
pub enum TraceOp {
    Join(usize),
    Leave(usize, LeaveReason),
}

pub const TRACE_POOL: [&str; 6] = ["ann", "ben", "cat", "dan", "eve", "fay"];

pub fn trace_op() -> impl Strategy<Value = TraceOp> {
    prop_oneof![
        (0..TRACE_POOL.len()).prop_map(TraceOp::Join),
        (0..TRACE_POOL.len(), leave_reason()).prop_map(|(i, r)| TraceOp::Leave(i, r)),
    ]
}

/// Replays `ops` through the registry and the oracle, failing on the first
/// disagreement.
pub fn check_trace(ops: &[TraceOp]) -> Result<(), String> {
    use gcs::registry::{Registry, RegistryError};
    let mut reg = Registry::new();
    let mut oracle = OracleRegistry::default();
    for (step, op) in ops.iter().enumerate() {
        match op {
            TraceOp::Join(i) => {
                let who = id(TRACE_POOL[*i]);
                let accepted = oracle.join(&who);
                match reg.add_member(who.clone(), Ipv4Addr::LOCALHOST, 5000 + *i as u16, Timestamp::EPOCH) {
                    Ok(adm) if accepted => {
                        let expect_coord = oracle.coordinator() == Some(who.clone());
                        if adm.became_coordinator != expect_coord {
                            return Err(format!(
                                "step {step}: became_coordinator={} for {who}",
                                adm.became_coordinator
                            ));
                        }
                        reg = adm.registry;
                    }
                    Err(RegistryError::DuplicateId(_)) if !accepted => {}
                    other => return Err(format!("step {step}: join {who} gave {other:?}, oracle accepted={accepted}")),
                }
            }
            TraceOp::Leave(i, reason) => {
                let who = id(TRACE_POOL[*i]);
                let old_coord = oracle.coordinator();
                let present = oracle.leave(&who);
                match reg.remove_member(&who, *reason) {
                    Ok(dep) if present => {
                        let handed = if old_coord.as_ref() == Some(&who) { oracle.coordinator() } else { None };
                        if dep.new_coordinator != handed {
                            return Err(format!("step {step}: successor {:?}, oracle {handed:?}", dep.new_coordinator));
                        }
                        reg = dep.registry;
                    }
                    Err(RegistryError::UnknownMember(_)) if !present => {}
                    other => return Err(format!("step {step}: leave {who} gave {other:?}, oracle present={present}")),
                }
            }
        }
        if reg.coordinator().cloned() != oracle.coordinator() {
            return Err(format!("step {step}: coordinator {:?}, oracle {:?}", reg.coordinator(), oracle.coordinator()));
        }
        let order: Vec<_> = reg.members().iter().map(|m| m.id.clone()).collect();
        if order != oracle.order() {
            return Err(format!("step {step}: order {order:?}, oracle {:?}", oracle.order()));
        }
    }
    Ok(())
}

/// Fifty scripted events covering joins, chat, details requests, quits,
/// drops, heartbeat timeouts and malformed input. The network settles after
/// each event.
pub fn golden_scenario() -> gcs::sim::SimNetwork {
    use gcs::sim::SimNetwork;

    enum Ev {
        Join(&'static str),
        Say(&'static str, &'static str),
        Impostor(&'static str, &'static str),
        Idle(&'static str),
        Drop(&'static str),
        Silent(&'static str),
        Raw(&'static str, &'static str),
        Advance(u64),
    }
    use Ev::*;

    let script = [
        Join("alice"),
        Join("bob"),
        Join("carol"),
        Say("alice", "good morning"),
        Say("bob", "@carol coffee?"),
        Say("carol", "@bob sure"),
        Say("carol", "@alice /memberdetails"),
        Say("bob", "@carol /memberdetails"),
        Join("dave"),
        Say("dave", "hi all"),
        Advance(5),
        Say("dave", "@erin hello?"),
        Join("erin"),
        Say("dave", "@erin hello?"),
        Say("erin", "hey dave"),
        Say("alice", "/quit"),
        Say("carol", "@bob /memberdetails"),
        Say("carol", "@alice /memberdetails"),
        Say("bob", "taking over"),
        Impostor("bob2", "bob"),
        Silent("erin"),
        Advance(5),
        Advance(5),
        Advance(5),
        Say("carol", "still here"),
        Idle("lurker"),
        Drop("lurker"),
        Raw("dave", "HELLO"),
        Raw("dave", "MSG ok"),
        Drop("bob"),
        Say("carol", "@carol /memberdetails"),
        Join("frank"),
        Say("frank", "hello frank here"),
        Say("frank", "@dave hi dave"),
        Say("dave", "@frank hi frank"),
        Advance(5),
        Join("gina"),
        Say("gina", "@carol /memberdetails"),
        Say("carol", "bye for now"),
        Say("carol", "/quit"),
        Say("gina", "@dave /memberdetails"),
        Say("frank", "/quit"),
        Say("dave", "anyone?"),
        Say("gina", "me"),
        Advance(3),
        Advance(2),
        Say("dave", "@gina last one"),
        Say("gina", "@dave ok"),
        Drop("gina"),
        Say("dave", "/quit"),
    ];
    assert_eq!(script.len(), 50);

    let mut net = SimNetwork::default();
    for ev in script {
        match ev {
            Join(name) => net.connect_client(name).unwrap(),
            Say(name, text) => {
                net.input(name, text).unwrap();
            }
            Impostor(name, wire) => net.connect_as(name, id(wire)).unwrap(),
            Idle(name) => net.connect_idle(name, id(name)).unwrap(),
            Drop(name) => net.drop_connection(name).unwrap(),
            Silent(name) => net.set_silent(name, true).unwrap(),
            Raw(name, line) => net.send_line(name, line.as_bytes()).unwrap(),
            Advance(secs) => {
                net.advance_time(secs);
            }
        }
        net.run_until_quiescent();
    }
    net
}
