use std::collections::{HashMap, HashSet};
use std::net::{SocketAddr, SocketAddrV4};
use std::sync::{Arc, Mutex, OnceLock};

use tokio::io::{AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::{self, Instant, MissedTickBehavior};

use crate::gateway::{self, GatewayHandle};
use crate::line::{read_line, LineError, MAX_LINE_BYTES};
use crate::protocol::{decode_bytes, encode_frame, BadFrame, Clock, SystemClock, WireFrame};

use super::log::{EventLog, LogEntry};
use super::router::{ConnId, Dispatch, Router};
use super::{BindError, BindErrorKind, ServerConfig, ServerError};

/// Endpoints held by servers running in this process.
fn claimed_endpoints() -> &'static Mutex<HashSet<SocketAddrV4>> {
    static CLAIMED: OnceLock<Mutex<HashSet<SocketAddrV4>>> = OnceLock::new();
    CLAIMED.get_or_init(Default::default)
}

/// One server per endpoint per process; released on drop.
#[derive(Debug)]
struct EndpointClaim(SocketAddrV4);

impl EndpointClaim {
    fn acquire(endpoint: SocketAddrV4) -> Result<Self, BindError> {
        let mut claimed = claimed_endpoints().lock().expect("endpoint table poisoned");
        if !claimed.insert(endpoint) {
            return Err(BindError { endpoint, kind: BindErrorKind::PortInUse, source: None });
        }
        Ok(EndpointClaim(endpoint))
    }
}

impl Drop for EndpointClaim {
    fn drop(&mut self) {
        if let Ok(mut claimed) = claimed_endpoints().lock() {
            claimed.remove(&self.0);
        }
    }
}

enum Event {
    Line { conn: ConnId, frame: Result<WireFrame, BadFrame> },
    Closed { conn: ConnId },
}

enum Outbound {
    Frame(WireFrame),
    Close,
}

/// Starts a server with the system clock and the log configured in
/// `config`.
pub async fn start(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    let log = match &config.log_path {
        Some(path) => EventLog::file(path).map_err(|source| ServerError::LogFile { path: path.clone(), source })?,
        None => EventLog::stdout(),
    };
    start_with(config, Arc::new(SystemClock), log).await
}

pub async fn start_with(
    config: ServerConfig,
    clock: Arc<dyn Clock>,
    mut log: EventLog,
) -> Result<ServerHandle, ServerError> {
    config.validate()?;
    let requested = config.endpoint();
    let early_claim = (requested.port() != 0).then(|| EndpointClaim::acquire(requested)).transpose()?;

    let listener = TcpListener::bind(requested).await.map_err(|e| BindError {
        endpoint: requested,
        kind: BindErrorKind::from_io(e.kind()),
        source: Some(e),
    })?;
    let local_addr = match listener.local_addr() {
        Ok(SocketAddr::V4(addr)) => addr,
        Ok(SocketAddr::V6(_)) => unreachable!("bound to an IPv4 address"),
        Err(e) => {
            return Err(BindError { endpoint: requested, kind: BindErrorKind::Other, source: Some(e) }.into());
        }
    };
    let claim = match early_claim {
        Some(claim) => claim,
        None => EndpointClaim::acquire(local_addr)?,
    };
    log.append(&LogEntry::bind(clock.now(), local_addr));
    tracing::info!(%local_addr, "server listening");

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let sequencer = Sequencer {
        router: Router::new(config.heartbeat_misses),
        log,
        clock,
        outboxes: HashMap::new(),
        factory: HandlerFactory { shutdown: shutdown_rx.clone() },
    };
    let task = tokio::spawn(sequencer.run(listener, config.heartbeat_interval, shutdown_rx));

    let gateway = match config.gateway_port {
        Some(port) => Some(gateway::serve_gateway(port, local_addr.ip().to_string(), local_addr.port()).await?),
        None => None,
    };

    Ok(ServerHandle { local_addr, shutdown: shutdown_tx, task: Some(task), gateway, _claim: claim })
}

/// A running server. Dropping the handle stops it.
#[derive(Debug)]
pub struct ServerHandle {
    local_addr: SocketAddrV4,
    shutdown: watch::Sender<bool>,
    task: Option<JoinHandle<()>>,
    gateway: Option<GatewayHandle>,
    _claim: EndpointClaim,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddrV4 {
        self.local_addr
    }

    pub fn gateway(&self) -> Option<&GatewayHandle> {
        self.gateway.as_ref()
    }

    /// Stops accepting, closes every connection and waits for the router to
    /// finish.
    pub async fn shutdown(mut self) {
        let _ = self.shutdown.send(true);
        if let Some(gateway) = self.gateway.take() {
            gateway.shutdown().await;
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }

    /// Resolves when the server stops on its own or is shut down.
    pub async fn wait(mut self) {
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown.send(true);
    }
}

struct Sequencer {
    router: Router,
    log: EventLog,
    clock: Arc<dyn Clock>,
    outboxes: HashMap<ConnId, mpsc::UnboundedSender<Outbound>>,
    factory: HandlerFactory,
}

impl Sequencer {
    async fn run(mut self, listener: TcpListener, interval: std::time::Duration, mut shutdown: watch::Receiver<bool>) {
        let (events_tx, mut events) = mpsc::unbounded_channel();
        let mut ticker = time::interval_at(Instant::now() + interval, interval);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

        loop {
            tokio::select! {
                biased;
                _ = shutdown.changed() => break,
                Some(event) = events.recv() => {
                    let now = self.clock.now();
                    let dispatch = match event {
                        Event::Line { conn, frame: Ok(frame) } => self.router.receive(conn, frame, now),
                        Event::Line { conn, frame: Err(reason) } => self.router.reject(conn, &reason, now),
                        Event::Closed { conn } => self.router.disconnect(conn, now),
                    };
                    self.carry_out(dispatch);
                }
                _ = ticker.tick() => {
                    let dispatch = self.router.sweep(self.clock.now());
                    self.carry_out(dispatch);
                }
                accepted = listener.accept() => match accepted {
                    Ok((stream, SocketAddr::V4(peer))) => {
                        let conn = self.router.open(peer);
                        let handler = self.factory.create(conn, stream, peer, events_tx.clone());
                        self.outboxes.insert(conn, handler.outbox.clone());
                        tokio::spawn(handler.run());
                    }
                    Ok((_, SocketAddr::V6(peer))) => tracing::warn!(%peer, "refusing IPv6 peer"),
                    Err(e) => tracing::warn!(error = %e, "accept failed"),
                },
            }
        }
        for (_, outbox) in self.outboxes.drain() {
            let _ = outbox.send(Outbound::Close);
        }
    }

    fn carry_out(&mut self, dispatch: Dispatch) {
        for entry in &dispatch.logs {
            self.log.append(entry);
        }
        for (conn, frame) in dispatch.sends {
            if let Some(outbox) = self.outboxes.get(&conn) {
                let _ = outbox.send(Outbound::Frame(frame));
            }
        }
        for conn in dispatch.closes {
            if let Some(outbox) = self.outboxes.remove(&conn) {
                let _ = outbox.send(Outbound::Close);
            }
        }
    }
}

/// Produces one [`SessionHandler`] per accepted connection.
#[derive(Debug, Clone)]
pub struct HandlerFactory {
    shutdown: watch::Receiver<bool>,
}

impl HandlerFactory {
    fn create(
        &self,
        conn: ConnId,
        stream: TcpStream,
        peer: SocketAddrV4,
        events: mpsc::UnboundedSender<Event>,
    ) -> SessionHandler {
        let (outbox, inbox) = mpsc::unbounded_channel();
        SessionHandler { conn, peer, stream, events, outbox, inbox, shutdown: self.shutdown.clone() }
    }
}

/// Transport side of one client connection.
///
/// Reads lines and hands decoded frames to the router; writes whatever the
/// router queues for this connection. Owns its socket exclusively.
pub struct SessionHandler {
    conn: ConnId,
    peer: SocketAddrV4,
    stream: TcpStream,
    events: mpsc::UnboundedSender<Event>,
    outbox: mpsc::UnboundedSender<Outbound>,
    inbox: mpsc::UnboundedReceiver<Outbound>,
    shutdown: watch::Receiver<bool>,
}

impl SessionHandler {
    pub fn conn(&self) -> ConnId {
        self.conn
    }

    pub fn peer(&self) -> SocketAddrV4 {
        self.peer
    }

    async fn run(self) {
        let SessionHandler { conn, peer, stream, events, inbox, shutdown, .. } = self;
        let (read_half, write_half) = stream.into_split();
        tracing::debug!(%conn, %peer, "connection opened");
        let reader = tokio::spawn(read_loop(conn, BufReader::new(read_half), events.clone()));
        write_loop(conn, write_half, inbox, shutdown, events).await;
        reader.abort();
        tracing::debug!(%conn, %peer, "connection closed");
    }
}

async fn read_loop(conn: ConnId, mut reader: BufReader<OwnedReadHalf>, events: mpsc::UnboundedSender<Event>) {
    let mut buf = Vec::new();
    loop {
        match read_line(&mut reader, &mut buf).await {
            Ok(Some(line)) => {
                let frame = decode_bytes(line);
                if events.send(Event::Line { conn, frame }).is_err() {
                    return;
                }
            }
            Ok(None) => break,
            Err(LineError::TooLong) => {
                let _ = events.send(Event::Line { conn, frame: Err(BadFrame::TooLong(MAX_LINE_BYTES)) });
                break;
            }
            Err(LineError::Io(e)) => {
                tracing::debug!(%conn, error = %e, "read failed");
                break;
            }
        }
    }
    let _ = events.send(Event::Closed { conn });
}

async fn write_loop(
    conn: ConnId,
    mut writer: OwnedWriteHalf,
    mut inbox: mpsc::UnboundedReceiver<Outbound>,
    mut shutdown: watch::Receiver<bool>,
    events: mpsc::UnboundedSender<Event>,
) {
    loop {
        tokio::select! {
            out = inbox.recv() => match out {
                Some(Outbound::Frame(frame)) => {
                    if let Err(e) = writer.write_all(encode_frame(&frame).as_bytes()).await {
                        tracing::debug!(%conn, error = %e, "write failed");
                        let _ = events.send(Event::Closed { conn });
                        return;
                    }
                }
                Some(Outbound::Close) | None => break,
            },
            _ = shutdown.changed() => break,
        }
    }
    let _ = writer.shutdown().await;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_are_exclusive_until_dropped() {
        let endpoint: SocketAddrV4 = "127.0.0.1:1".parse().unwrap();
        let claim = EndpointClaim::acquire(endpoint).unwrap();
        let err = EndpointClaim::acquire(endpoint).unwrap_err();
        assert_eq!(err.kind, BindErrorKind::PortInUse);
        drop(claim);
        assert!(EndpointClaim::acquire(endpoint).is_ok());
    }
}
