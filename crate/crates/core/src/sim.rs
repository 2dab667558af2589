//! Deterministic in-memory network for driving the server's [`Router`] and
//! [`ClientSession`]s through scripted scenarios on a virtual clock.
//!
//! Nothing moves until the script calls [`SimNetwork::step`],
//! [`SimNetwork::run_until_quiescent`] or [`SimNetwork::advance_time`].
//! Every delivery is recorded in the transcript.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::net::{Ipv4Addr, SocketAddrV4};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::client::{ClientEvent, ClientSession, Submission};
use crate::protocol::{decode_bytes, MemberId, Timestamp, WireFrame};
use crate::registry::Registry;
use crate::server::{ConnId, Dispatch, LogEntry, Router, DEFAULT_HEARTBEAT_INTERVAL, DEFAULT_HEARTBEAT_MISSES};

/// First simulated client port; each connection takes the next one.
pub const FIRST_CLIENT_PORT: u16 = 5001;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub heartbeat_interval_secs: u64,
    pub heartbeat_misses: u32,
    pub start: Timestamp,
    /// `None` delivers in global FIFO order. `Some(seed)` picks the next
    /// delivery at random among channel heads, so per-channel order holds.
    pub shuffle_seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            heartbeat_interval_secs: DEFAULT_HEARTBEAT_INTERVAL.as_secs(),
            heartbeat_misses: DEFAULT_HEARTBEAT_MISSES,
            start: "2024-03-01 10:00:00".parse().expect("valid literal"),
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("simulation id {0} already in use")]
    DuplicateSimId(String),
    #[error("no simulated client named {0}")]
    UnknownClient(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ClientToServer => "C>S",
            Direction::ServerToClient => "S>C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Frame(WireFrame),
    /// Raw bytes as typed on the wire, for malformed input.
    Raw(Vec<u8>),
    /// The sending side closed its end.
    Eof,
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Frame(frame) => write!(f, "{frame}"),
            Payload::Raw(bytes) => write!(f, "{:?}", String::from_utf8_lossy(bytes)),
            Payload::Eof => f.write_str("<eof>"),
        }
    }
}

/// One delivery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub at: Timestamp,
    pub direction: Direction,
    /// Simulation id of the client end.
    pub endpoint: String,
    pub payload: Payload,
}

impl TranscriptEntry {
    pub fn frame(&self) -> Option<&WireFrame> {
        match &self.payload {
            Payload::Frame(frame) => Some(frame),
            _ => None,
        }
    }
}

impl fmt::Display for TranscriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} {} {}", self.at, self.direction, self.endpoint, self.payload)
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    direction: Direction,
    endpoint: String,
    payload: Payload,
}

#[derive(Debug, Clone)]
pub struct SimClient {
    wire_id: MemberId,
    conn: ConnId,
    peer: SocketAddrV4,
    session: ClientSession,
    events: Vec<ClientEvent>,
    silent: bool,
    severed: bool,
}

impl SimClient {
    pub fn wire_id(&self) -> &MemberId {
        &self.wire_id
    }

    pub fn conn(&self) -> ConnId {
        self.conn
    }

    pub fn peer(&self) -> SocketAddrV4 {
        self.peer
    }

    pub fn session(&self) -> &ClientSession {
        &self.session
    }

    /// Events in the order the client state machine produced them.
    pub fn events(&self) -> &[ClientEvent] {
        &self.events
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    pub fn is_severed(&self) -> bool {
        self.severed
    }
}

#[derive(Debug)]
pub struct SimNetwork {
    config: SimConfig,
    router: Router,
    now: Timestamp,
    next_sweep: Timestamp,
    sweeps: u64,
    clients: BTreeMap<String, SimClient>,
    by_conn: HashMap<ConnId, String>,
    pending: VecDeque<InFlight>,
    transcript: Vec<TranscriptEntry>,
    log: Vec<LogEntry>,
    next_port: u16,
    rng: Option<ChaCha8Rng>,
}

impl Default for SimNetwork {
    fn default() -> Self {
        Self::new(SimConfig::default())
    }
}

impl SimNetwork {
    pub fn new(config: SimConfig) -> Self {
        assert!(config.heartbeat_interval_secs > 0, "heartbeat interval must be positive");
        SimNetwork {
            router: Router::new(config.heartbeat_misses),
            now: config.start,
            next_sweep: config.start.plus_secs(config.heartbeat_interval_secs),
            sweeps: 0,
            clients: BTreeMap::new(),
            by_conn: HashMap::new(),
            pending: VecDeque::new(),
            transcript: Vec::new(),
            log: Vec::new(),
            next_port: FIRST_CLIENT_PORT,
            rng: config.shuffle_seed.map(ChaCha8Rng::seed_from_u64),
            config,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn registry(&self) -> &Registry {
        self.router.registry()
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn client(&self, name: &str) -> Option<&SimClient> {
        self.clients.get(name)
    }

    pub fn clients(&self) -> impl Iterator<Item = (&str, &SimClient)> {
        self.clients.iter().map(|(name, c)| (name.as_str(), c))
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Frames delivered to `name`, in delivery order.
    pub fn received_by(&self, name: &str) -> Vec<&WireFrame> {
        self.transcript
            .iter()
            .filter(|e| e.direction == Direction::ServerToClient && e.endpoint == name)
            .filter_map(TranscriptEntry::frame)
            .collect()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// The server log as it would appear on disk.
    pub fn log_lines(&self) -> Vec<String> {
        self.log.iter().map(ToString::to_string).collect()
    }

    /// SHA-256 over the rendered transcript, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for entry in &self.transcript {
            hasher.update(entry.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Opens a connection for `name` and queues `JOIN name`.
    pub fn connect_client(&mut self, name: &str) -> Result<(), SimError> {
        let id = MemberId::new(name).expect("simulation id must be a valid member id");
        self.connect_as(name, id)
    }

    /// Opens a connection named `name` that will JOIN as `wire_id`.
    pub fn connect_as(&mut self, name: &str, wire_id: MemberId) -> Result<(), SimError> {
        self.connect_idle(name, wire_id)?;
        let client = self.clients.get_mut(name).expect("just inserted");
        let join = client.session.begin_join(client.wire_id.clone());
        self.enqueue(Direction::ClientToServer, name, Payload::Frame(join));
        Ok(())
    }

    /// Opens a connection that has not sent anything yet.
    pub fn connect_idle(&mut self, name: &str, wire_id: MemberId) -> Result<(), SimError> {
        if self.clients.contains_key(name) {
            return Err(SimError::DuplicateSimId(name.to_owned()));
        }
        let peer = SocketAddrV4::new(Ipv4Addr::LOCALHOST, self.next_port);
        self.next_port += 1;
        let conn = self.router.open(peer);
        self.by_conn.insert(conn, name.to_owned());
        self.clients.insert(
            name.to_owned(),
            SimClient {
                wire_id,
                conn,
                peer,
                session: ClientSession::new(),
                events: Vec::new(),
                silent: false,
                severed: false,
            },
        );
        Ok(())
    }

    /// [`connect_client`](Self::connect_client) followed by a run to
    /// quiescence.
    pub fn join(&mut self, name: &str) -> Result<(), SimError> {
        self.connect_client(name)?;
        self.run_until_quiescent();
        Ok(())
    }

    /// Types a line into `name`'s client. Returns locally produced events.
    pub fn input(&mut self, name: &str, text: &str) -> Result<Vec<ClientEvent>, SimError> {
        let client = self.client_mut(name)?;
        match client.session.submit_input(text) {
            Submission::Local(event) => {
                client.events.push(event.clone());
                Ok(vec![event])
            }
            Submission::Send(frame) => {
                let quitting = frame == WireFrame::Quit;
                self.enqueue(Direction::ClientToServer, name, Payload::Frame(frame));
                if quitting {
                    self.enqueue(Direction::ClientToServer, name, Payload::Eof);
                }
                Ok(Vec::new())
            }
        }
    }

    /// Queues a frame from `name` bypassing its state machine.
    pub fn send_frame(&mut self, name: &str, frame: WireFrame) -> Result<(), SimError> {
        self.client_mut(name)?;
        self.enqueue(Direction::ClientToServer, name, Payload::Frame(frame));
        Ok(())
    }

    /// Queues raw bytes from `name` as one line.
    pub fn send_line(&mut self, name: &str, line: &[u8]) -> Result<(), SimError> {
        self.client_mut(name)?;
        self.enqueue(Direction::ClientToServer, name, Payload::Raw(line.to_vec()));
        Ok(())
    }

    /// A silent client stops answering PINGs but stays connected.
    pub fn set_silent(&mut self, name: &str, silent: bool) -> Result<(), SimError> {
        self.client_mut(name)?.silent = silent;
        Ok(())
    }

    /// Severs `name`'s connection without QUIT. Frames it already sent still
    /// arrive, then the server sees EOF. Nothing more reaches the client.
    pub fn drop_connection(&mut self, name: &str) -> Result<(), SimError> {
        let client = self.client_mut(name)?;
        if client.severed {
            return Ok(());
        }
        client.severed = true;
        let lost = client.session.connection_lost().events;
        client.events.extend(lost);
        self.enqueue(Direction::ClientToServer, name, Payload::Eof);
        Ok(())
    }

    /// Delivers the next frame. `None` when nothing is pending.
    pub fn step(&mut self) -> Option<TranscriptEntry> {
        let index = match &mut self.rng {
            None => 0,
            Some(rng) => {
                let mut seen = Vec::new();
                let mut heads = Vec::new();
                for (i, f) in self.pending.iter().enumerate() {
                    let channel = (f.direction, f.endpoint.as_str());
                    if !seen.contains(&channel) {
                        seen.push(channel);
                        heads.push(i);
                    }
                }
                if heads.is_empty() {
                    return None;
                }
                heads[rng.random_range(0..heads.len())]
            }
        };
        let InFlight { direction, endpoint, payload } = self.pending.remove(index)?;
        match direction {
            Direction::ClientToServer => self.deliver_to_server(&endpoint, &payload),
            Direction::ServerToClient => {
                if self.clients.get(&endpoint).is_none_or(|c| c.severed) {
                    return self.step();
                }
                self.deliver_to_client(&endpoint, &payload);
            }
        }
        let entry = TranscriptEntry { at: self.now, direction, endpoint, payload };
        self.transcript.push(entry.clone());
        Some(entry)
    }

    /// Steps until nothing is pending; returns the number of deliveries.
    pub fn run_until_quiescent(&mut self) -> usize {
        let mut delivered = 0;
        while self.step().is_some() {
            delivered += 1;
        }
        delivered
    }

    /// Moves the clock forward `secs` seconds, running a heartbeat sweep at
    /// every interval boundary crossed and letting the network settle after
    /// each. Returns the number of sweeps.
    pub fn advance_time(&mut self, secs: u64) -> u64 {
        let target = self.now.plus_secs(secs);
        let mut fired = 0;
        while self.next_sweep <= target {
            self.now = self.next_sweep;
            self.next_sweep = self.next_sweep.plus_secs(self.config.heartbeat_interval_secs);
            let dispatch = self.router.sweep(self.now);
            self.carry_out(dispatch);
            self.sweeps += 1;
            fired += 1;
            self.run_until_quiescent();
        }
        self.now = target;
        fired
    }

    fn client_mut(&mut self, name: &str) -> Result<&mut SimClient, SimError> {
        self.clients.get_mut(name).ok_or_else(|| SimError::UnknownClient(name.to_owned()))
    }

    fn enqueue(&mut self, direction: Direction, endpoint: &str, payload: Payload) {
        self.pending.push_back(InFlight { direction, endpoint: endpoint.to_owned(), payload });
    }

    fn deliver_to_server(&mut self, name: &str, payload: &Payload) {
        let conn = self.clients[name].conn;
        let dispatch = match payload {
            Payload::Frame(frame) => self.router.receive(conn, frame.clone(), self.now),
            Payload::Raw(bytes) => match decode_bytes(bytes) {
                Ok(frame) => self.router.receive(conn, frame, self.now),
                Err(reason) => self.router.reject(conn, &reason, self.now),
            },
            Payload::Eof => self.router.disconnect(conn, self.now),
        };
        self.carry_out(dispatch);
    }

    fn deliver_to_client(&mut self, name: &str, payload: &Payload) {
        let client = self.clients.get_mut(name).expect("checked by caller");
        let applied = match payload {
            Payload::Frame(frame) => client.session.apply_server_frame(frame.clone()),
            Payload::Raw(bytes) => client.session.apply_line(bytes),
            Payload::Eof => client.session.connection_lost(),
        };
        client.events.extend(applied.events);
        if let Some(reply) = applied.reply {
            if !client.silent {
                self.enqueue(Direction::ClientToServer, name, Payload::Frame(reply));
            }
        }
    }

    fn carry_out(&mut self, dispatch: Dispatch) {
        let Dispatch { logs, sends, closes } = dispatch;
        self.log.extend(logs);
        for (conn, frame) in sends {
            if let Some(name) = self.by_conn.get(&conn).cloned() {
                self.enqueue(Direction::ServerToClient, &name, Payload::Frame(frame));
            }
        }
        for conn in closes {
            if let Some(name) = self.by_conn.get(&conn).cloned() {
                self.enqueue(Direction::ServerToClient, &name, Payload::Eof);
            }
        }
    }
}
