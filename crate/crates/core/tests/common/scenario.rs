//! Random scenario driver for the simulator, plus transcript checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use gcs::protocol::{MemberId, WireFrame};
use gcs::sim::{Direction, SimNetwork};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Act {
    Join,
    Msg(usize),
    Priv(usize, usize),
    PrivGhost(usize),
    Details(usize, usize),
    Quit(usize),
    Drop(usize),
    Silence(usize),
    Advance(u64),
    Settle,
    Step,
}

pub fn random_act(rng: &mut ChaCha8Rng) -> Act {
    let i = rng.random_range(0..64);
    let j = rng.random_range(0..64);
    match rng.random_range(0..100) {
        0..15 => Act::Join,
        15..35 => Act::Msg(i),
        35..55 => Act::Priv(i, j),
        55..58 => Act::PrivGhost(i),
        58..64 => Act::Details(i, j),
        64..68 => Act::Quit(i),
        68..72 => Act::Drop(i),
        72..74 => Act::Silence(i),
        74..78 => Act::Advance(rng.random_range(0..12)),
        78..88 => Act::Settle,
        _ => Act::Step,
    }
}

/// What the server had to do with one routed MSG.
#[derive(Debug, Clone)]
pub struct RoutedBroadcast {
    pub body: String,
    pub sender: String,
    /// Sim names that were members when the MSG was routed.
    pub members: BTreeSet<String>,
}

pub struct Driver {
    pub net: SimNetwork,
    /// Every sim name ever connected, in connection order.
    pub names: Vec<String>,
    pub routed: Vec<RoutedBroadcast>,
    pub routed_private: usize,
    pub routed_details: usize,
    pub violations: Vec<String>,
    uid: u64,
}

impl Driver {
    pub fn new(net: SimNetwork) -> Self {
        Driver {
            net,
            names: Vec::new(),
            routed: Vec::new(),
            routed_private: 0,
            routed_details: 0,
            violations: Vec::new(),
            uid: 0,
        }
    }

    fn pick(&self, i: usize) -> Option<String> {
        (!self.names.is_empty()).then(|| self.names[i % self.names.len()].clone())
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.uid += 1;
        format!("{prefix}{}", self.uid)
    }

    pub fn apply(&mut self, act: &Act) {
        match act {
            Act::Join => {
                let name = self.fresh("m");
                self.net.connect_client(&name).unwrap();
                self.names.push(name);
            }
            Act::Msg(i) => {
                if let Some(from) = self.pick(*i) {
                    let text = self.fresh("b");
                    self.net.input(&from, &text).unwrap();
                }
            }
            Act::Priv(i, j) => {
                if let (Some(from), Some(to)) = (self.pick(*i), self.pick(*j)) {
                    let text = self.fresh("p");
                    self.net.input(&from, &format!("@{to} {text}")).unwrap();
                }
            }
            Act::PrivGhost(i) => {
                if let Some(from) = self.pick(*i) {
                    let text = self.fresh("p");
                    self.net.input(&from, &format!("@ghost {text}")).unwrap();
                }
            }
            Act::Details(i, j) => {
                if let (Some(from), Some(to)) = (self.pick(*i), self.pick(*j)) {
                    self.net.input(&from, &format!("@{to} /memberdetails")).unwrap();
                }
            }
            Act::Quit(i) => {
                if let Some(who) = self.pick(*i) {
                    self.net.input(&who, "/quit").unwrap();
                }
            }
            Act::Drop(i) => {
                if let Some(who) = self.pick(*i) {
                    self.net.drop_connection(&who).unwrap();
                }
            }
            Act::Silence(i) => {
                if let Some(who) = self.pick(*i) {
                    self.net.set_silent(&who, true).unwrap();
                }
            }
            Act::Advance(secs) => {
                self.settle();
                self.net.advance_time(*secs);
                self.check_continuity();
            }
            Act::Settle => self.settle(),
            Act::Step => {
                self.step();
            }
        }
    }

    pub fn step(&mut self) -> bool {
        let Some(entry) = self.net.step() else { return false };
        let registry = self.net.registry();
        let sender_is_member = registry.contains(self.net.client(&entry.endpoint).unwrap().wire_id());
        if let (Direction::ClientToServer, Some(WireFrame::Priv { target, body }), true) =
            (entry.direction, entry.frame(), sender_is_member)
        {
            if body.as_str() == "/memberdetails" {
                self.routed_details += usize::from(registry.is_coordinator(target));
            } else {
                self.routed_private += usize::from(registry.contains(target));
            }
        }
        if let (Direction::ClientToServer, Some(WireFrame::Msg { body })) = (entry.direction, entry.frame()) {
            if sender_is_member {
                let members = self
                    .net
                    .clients()
                    .filter(|(_, c)| registry.contains(c.wire_id()))
                    .map(|(name, _)| name.to_owned())
                    .collect();
                self.routed.push(RoutedBroadcast { body: body.to_string(), sender: entry.endpoint.clone(), members });
            }
        }
        self.check_continuity();
        true
    }

    pub fn settle(&mut self) {
        while self.step() {}
    }

    fn check_continuity(&mut self) {
        let registry = self.net.registry();
        let oldest = registry.members().iter().min_by_key(|m| m.join_seq).map(|m| &m.id);
        if registry.coordinator() != oldest {
            self.violations.push(format!(
                "at {}: coordinator {:?} but oldest member {:?}",
                self.net.now(),
                registry.coordinator(),
                oldest
            ));
        }
    }
}

fn wire_id(net: &SimNetwork, name: &str) -> MemberId {
    net.client(name).unwrap().wire_id().clone()
}

/// Each routed broadcast reached exactly the members of the moment, minus
/// clients whose connection was severed before delivery, and nobody else.
pub fn check_broadcast_exactness(driver: &Driver) -> Result<usize, String> {
    let net = &driver.net;
    let mut delivered: HashMap<String, BTreeMap<String, usize>> = HashMap::new();
    for e in net.transcript() {
        if let (Direction::ServerToClient, Some(WireFrame::Bcast { body, .. })) = (e.direction, e.frame()) {
            *delivered.entry(body.to_string()).or_default().entry(e.endpoint.clone()).or_default() += 1;
        }
    }
    for routed in &driver.routed {
        let got = delivered.remove(&routed.body).unwrap_or_default();
        if let Some((who, n)) = got.iter().find(|(_, n)| **n > 1) {
            return Err(format!("{} delivered {n} times to {who}", routed.body));
        }
        for who in got.keys() {
            if !routed.members.contains(who) {
                return Err(format!("{} reached non-member {who}", routed.body));
            }
        }
        for who in &routed.members {
            if !got.contains_key(who) && !net.client(who).unwrap().is_severed() {
                return Err(format!("{} never reached member {who}", routed.body));
            }
        }
    }
    if let Some(body) = delivered.keys().next() {
        return Err(format!("BCAST {body} without a routed MSG"));
    }
    Ok(driver.routed.len())
}

/// No PRIVMSG is seen by anyone except the addressed member. Returns the
/// number of PRIVMSG deliveries checked.
pub fn check_confidentiality(net: &SimNetwork) -> Result<usize, String> {
    let mut target_of: HashMap<String, (MemberId, MemberId)> = HashMap::new();
    let mut checked = 0;
    for e in net.transcript() {
        match (e.direction, e.frame()) {
            (Direction::ClientToServer, Some(WireFrame::Priv { target, body })) => {
                target_of.insert(body.to_string(), (wire_id(net, &e.endpoint), target.clone()));
            }
            (Direction::ServerToClient, Some(WireFrame::Privmsg { from, body, .. })) => {
                let Some((sender, target)) = target_of.get(body.as_str()) else {
                    return Err(format!("PRIVMSG {body} with no request"));
                };
                let receiver = wire_id(net, &e.endpoint);
                if &receiver != target || from != sender {
                    return Err(format!("PRIVMSG {body} for {target} from {sender} seen by {receiver} as from {from}"));
                }
                checked += 1;
            }
            _ => {}
        }
    }
    Ok(checked)
}

/// Any two recipients see common broadcasts in the same order.
pub fn check_global_order(net: &SimNetwork) -> Result<(), String> {
    let mut seen: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for e in net.transcript() {
        if let (Direction::ServerToClient, Some(WireFrame::Bcast { body, .. })) = (e.direction, e.frame()) {
            seen.entry(e.endpoint.as_str()).or_default().push(body.to_string());
        }
    }
    let lists: Vec<_> = seen.into_iter().collect();
    for (a, la) in &lists {
        for (b, lb) in &lists {
            let common: BTreeSet<_> = la.iter().filter(|x| lb.contains(x)).collect();
            let oa: Vec<_> = la.iter().filter(|x| common.contains(x)).collect();
            let ob: Vec<_> = lb.iter().filter(|x| common.contains(x)).collect();
            if oa != ob {
                return Err(format!("{a} and {b} disagree on broadcast order"));
            }
        }
    }
    Ok(())
}

/// After the coordinator a client knows of leaves, it hears COORD before
/// any MEMBERS.
pub fn check_coord_before_members(net: &SimNetwork) -> Result<(), String> {
    let mut known: HashMap<&str, (Option<MemberId>, bool)> = HashMap::new();
    for e in net.transcript() {
        if e.direction != Direction::ServerToClient {
            continue;
        }
        let state = known.entry(e.endpoint.as_str()).or_insert((None, false));
        match e.frame() {
            Some(WireFrame::Welcome { coordinator, .. }) | Some(WireFrame::Coord { id: coordinator }) => {
                *state = (Some(coordinator.clone()), false);
            }
            Some(WireFrame::Left { id, .. }) if state.0.as_ref() == Some(id) => state.1 = true,
            Some(WireFrame::Members { .. }) if state.1 => {
                return Err(format!("{} got MEMBERS before learning the new coordinator", e.endpoint));
            }
            _ => {}
        }
    }
    Ok(())
}

/// One log entry per routed broadcast, private message and details
/// request, and none for refused ones.
pub fn check_log_completeness(driver: &Driver) -> Result<usize, String> {
    let log = driver.net.log();
    let count = |kind: &str| log.iter().filter(|l| l.kind.as_str() == kind).count();
    let logged = (count("BROADCAST"), count("PRIVATE"), count("DETAILS"));
    let routed = (driver.routed.len(), driver.routed_private, driver.routed_details);
    if logged != routed {
        return Err(format!("logged {logged:?} broadcast/private/details, routed {routed:?}"));
    }
    Ok(routed.0 + routed.1 + routed.2)
}
