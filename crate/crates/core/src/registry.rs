//! Membership model: the ordered member set, its coordinator, and election.
//!
//! The first member admitted is the coordinator. When the coordinator leaves,
//! the surviving member with the smallest admission sequence number takes
//! over. The registry is a plain value; every transition returns a new
//! registry and leaves the receiver untouched.

use std::net::Ipv4Addr;

use thiserror::Error;

use crate::protocol::{LeaveReason, MemberEntry, MemberId, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub id: MemberId,
    pub ip: Ipv4Addr,
    pub port: u16,
    /// Admission counter; unique and increasing in join order.
    pub join_seq: u64,
    pub joined_at: Timestamp,
}

impl Member {
    pub fn entry(&self) -> MemberEntry {
        MemberEntry::new(self.id.clone(), self.ip, self.port)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    members: Vec<Member>,
    coordinator: Option<MemberId>,
    next_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("member id {0} is already taken")]
    DuplicateId(MemberId),
    #[error("no member named {0}")]
    UnknownMember(MemberId),
    #[error("no member named {0} to deliver to")]
    UnknownTarget(MemberId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admission {
    pub registry: Registry,
    pub member: Member,
    pub became_coordinator: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Departure {
    pub registry: Registry,
    pub member: Member,
    pub reason: LeaveReason,
    pub was_coordinator: bool,
    /// The successor, set only when the departed member was coordinator and
    /// someone is left to take over.
    pub new_coordinator: Option<MemberId>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Members in join order.
    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn coordinator(&self) -> Option<&MemberId> {
        self.coordinator.as_ref()
    }

    pub fn is_coordinator(&self, id: &MemberId) -> bool {
        self.coordinator.as_ref() == Some(id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &MemberId) -> bool {
        self.members.iter().any(|m| &m.id == id)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn add_member(
        &self,
        id: MemberId,
        ip: Ipv4Addr,
        port: u16,
        now: Timestamp,
    ) -> Result<Admission, RegistryError> {
        if self.contains(&id) {
            return Err(RegistryError::DuplicateId(id));
        }
        let member = Member { id, ip, port, join_seq: self.next_seq, joined_at: now };
        let mut registry = self.clone();
        registry.members.push(member.clone());
        registry.next_seq += 1;
        let became_coordinator = registry.coordinator.is_none();
        if became_coordinator {
            registry.coordinator = Some(member.id.clone());
        }
        Ok(Admission { registry, member, became_coordinator })
    }

    pub fn remove_member(&self, id: &MemberId, reason: LeaveReason) -> Result<Departure, RegistryError> {
        let pos =
            self.members.iter().position(|m| &m.id == id).ok_or_else(|| RegistryError::UnknownMember(id.clone()))?;
        let mut registry = self.clone();
        let member = registry.members.remove(pos);
        let was_coordinator = registry.is_coordinator(&member.id);
        let mut new_coordinator = None;
        if was_coordinator {
            // Members stay sorted by join_seq, so the oldest survivor is first.
            registry.coordinator = registry.members.first().map(|m| m.id.clone());
            new_coordinator = registry.coordinator.clone();
        }
        Ok(Departure { registry, member, reason, was_coordinator, new_coordinator })
    }

    /// `(id, ip, port)` for every member, in join order.
    pub fn member_details(&self) -> Vec<MemberEntry> {
        self.members.iter().map(Member::entry).collect()
    }

    pub fn resolve_target(&self, id: &MemberId) -> Result<&Member, RegistryError> {
        self.members.iter().find(|m| &m.id == id).ok_or_else(|| RegistryError::UnknownTarget(id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> MemberId {
        MemberId::new(s).unwrap()
    }

    fn with(names: &[&str]) -> Registry {
        names.iter().enumerate().fold(Registry::new(), |reg, (i, name)| {
            reg.add_member(id(name), Ipv4Addr::LOCALHOST, 5001 + i as u16, Timestamp::EPOCH).unwrap().registry
        })
    }

    #[test]
    fn first_joiner_is_coordinator() {
        let a = Registry::new().add_member(id("alice"), Ipv4Addr::LOCALHOST, 5001, Timestamp::EPOCH).unwrap();
        assert!(a.became_coordinator);
        assert_eq!(a.registry.coordinator(), Some(&id("alice")));
        assert_eq!(a.member.join_seq, 0);

        let b = a.registry.add_member(id("bob"), Ipv4Addr::LOCALHOST, 5002, Timestamp::EPOCH).unwrap();
        assert!(!b.became_coordinator);
        assert_eq!(b.registry.coordinator(), Some(&id("alice")));
        assert_eq!(b.member.join_seq, 1);
    }

    #[test]
    fn duplicate_id_leaves_registry_unchanged() {
        let reg = with(&["alice"]);
        let err = reg.add_member(id("alice"), Ipv4Addr::LOCALHOST, 9, Timestamp::EPOCH).unwrap_err();
        assert_eq!(err, RegistryError::DuplicateId(id("alice")));
        assert_eq!(reg, with(&["alice"]));
    }

    #[test]
    fn coordinator_departure_hands_over_to_oldest() {
        let d = with(&["alice", "bob", "carol"]).remove_member(&id("alice"), LeaveReason::Quit).unwrap();
        assert!(d.was_coordinator);
        assert_eq!(d.new_coordinator, Some(id("bob")));
        assert_eq!(d.registry.coordinator(), Some(&id("bob")));
    }

    #[test]
    fn last_member_leaves_no_coordinator() {
        let d = with(&["alice"]).remove_member(&id("alice"), LeaveReason::Timeout).unwrap();
        assert!(d.was_coordinator);
        assert_eq!(d.new_coordinator, None);
        assert_eq!(d.registry.coordinator(), None);
        assert!(d.registry.is_empty());
    }

    #[test]
    fn non_coordinator_departure_keeps_coordinator() {
        let d = with(&["alice", "bob"]).remove_member(&id("bob"), LeaveReason::Error).unwrap();
        assert!(!d.was_coordinator);
        assert_eq!(d.new_coordinator, None);
        assert_eq!(d.registry.coordinator(), Some(&id("alice")));
    }

    #[test]
    fn removal_is_idempotent() {
        let reg = with(&["alice", "bob"]);
        let once = reg.remove_member(&id("bob"), LeaveReason::Quit).unwrap().registry;
        let err = once.remove_member(&id("bob"), LeaveReason::Quit).unwrap_err();
        assert_eq!(err, RegistryError::UnknownMember(id("bob")));
    }

    #[test]
    fn rejoin_gets_fresh_sequence() {
        let reg = with(&["alice", "bob"]).remove_member(&id("alice"), LeaveReason::Quit).unwrap().registry;
        let again = reg.add_member(id("alice"), Ipv4Addr::LOCALHOST, 7000, Timestamp::EPOCH).unwrap();
        assert_eq!(again.member.join_seq, 2);
        assert!(!again.became_coordinator);
        assert_eq!(again.registry.coordinator(), Some(&id("bob")));
    }

    #[test]
    fn details_in_join_order() {
        assert!(Registry::new().member_details().is_empty());
        let reg = with(&["alice", "bob"]);
        let expected: Vec<MemberEntry> =
            reg.members().iter().map(|m| MemberEntry::new(m.id.clone(), m.ip, m.port)).collect();
        assert_eq!(reg.member_details(), expected);
        assert_eq!(
            reg.member_details(),
            vec![
                MemberEntry::new(id("alice"), Ipv4Addr::LOCALHOST, 5001),
                MemberEntry::new(id("bob"), Ipv4Addr::LOCALHOST, 5002),
            ]
        );
        let after = reg.remove_member(&id("bob"), LeaveReason::Quit).unwrap().registry;
        assert_eq!(after.member_details(), vec![MemberEntry::new(id("alice"), Ipv4Addr::LOCALHOST, 5001)]);
    }

    #[test]
    fn resolve_target_exact_match() {
        let reg = with(&["alice", "bob"]);
        assert_eq!(reg.resolve_target(&id("alice")).unwrap().port, 5001);
        assert_eq!(reg.resolve_target(&id("mallory")), Err(RegistryError::UnknownTarget(id("mallory"))));
        assert!(reg.resolve_target(&id("Alice")).is_err());
        let after = reg.remove_member(&id("alice"), LeaveReason::Quit).unwrap().registry;
        assert_eq!(after.resolve_target(&id("alice")), Err(RegistryError::UnknownTarget(id("alice"))));
    }
}
