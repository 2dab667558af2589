use std::io;
use std::time::Duration;

use thiserror::Error;
use tokio::io::{AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::timeout;

use crate::line::read_line;
use crate::protocol::{encode_frame, ErrorCode, MemberId, WireFrame};

use super::{Applied, ClientEvent, ClientPhase, ClientSession, DisconnectReason, Submission};

pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum JoinError {
    #[error("connection refused by {endpoint}")]
    ConnectionRefused { endpoint: String, source: io::Error },
    #[error("cannot connect to {endpoint}: {source}")]
    Connect { endpoint: String, source: io::Error },
    #[error("id {0} is already taken")]
    DuplicateId(MemberId),
    #[error("no WELCOME within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("server broke protocol during join")]
    Protocol,
    #[error("server closed the connection during join")]
    Closed,
}

impl JoinError {
    /// Exit-code class: connection problems versus protocol problems.
    pub fn is_connection_error(&self) -> bool {
        matches!(
            self,
            JoinError::ConnectionRefused { .. }
                | JoinError::Connect { .. }
                | JoinError::HandshakeTimeout(_)
                | JoinError::Closed
        )
    }
}

/// What the reader task saw on the socket.
#[derive(Debug)]
pub enum Incoming {
    Line(Vec<u8>),
    /// EOF, a reset, or an overlong line.
    Closed,
}

/// A joined TCP client: the [`ClientSession`] plus its socket.
#[derive(Debug)]
pub struct ClientConnection {
    session: ClientSession,
    writer: OwnedWriteHalf,
    incoming: mpsc::UnboundedReceiver<Incoming>,
    reader: JoinHandle<()>,
}

pub async fn connect_and_join(
    host: &str,
    port: u16,
    id: MemberId,
) -> Result<(ClientConnection, ClientEvent), JoinError> {
    connect_and_join_with_timeout(host, port, id, HANDSHAKE_TIMEOUT).await
}

/// Connects, sends JOIN and waits up to `limit` for WELCOME. Returns the
/// connection and its `Joined` event.
pub async fn connect_and_join_with_timeout(
    host: &str,
    port: u16,
    id: MemberId,
    limit: Duration,
) -> Result<(ClientConnection, ClientEvent), JoinError> {
    let endpoint = format!("{host}:{port}");
    let stream = TcpStream::connect((host, port)).await.map_err(|source| {
        if source.kind() == io::ErrorKind::ConnectionRefused {
            JoinError::ConnectionRefused { endpoint: endpoint.clone(), source }
        } else {
            JoinError::Connect { endpoint: endpoint.clone(), source }
        }
    })?;
    let (read_half, writer) = stream.into_split();
    let (tx, incoming) = mpsc::unbounded_channel();
    let reader = tokio::spawn(read_loop(BufReader::new(read_half), tx));
    let mut conn = ClientConnection { session: ClientSession::new(), writer, incoming, reader };

    let join = conn.session.begin_join(id.clone());
    conn.write(&join).await.map_err(|_| JoinError::Closed)?;

    let handshake = async {
        loop {
            let incoming = conn.recv().await;
            let applied = conn.process(incoming).await;
            for event in applied {
                match event {
                    joined @ ClientEvent::Joined { .. } => return Ok(joined),
                    ClientEvent::Disconnected(DisconnectReason::Rejected(ErrorCode::DuplicateId)) => {
                        return Err(JoinError::DuplicateId(id.clone()))
                    }
                    ClientEvent::Disconnected(DisconnectReason::ProtocolError) => return Err(JoinError::Protocol),
                    ClientEvent::Disconnected(_) => return Err(JoinError::Closed),
                    _ => {}
                }
            }
        }
    };
    match timeout(limit, handshake).await {
        Ok(Ok(joined)) => Ok((conn, joined)),
        Ok(Err(e)) => Err(e),
        Err(_) => Err(JoinError::HandshakeTimeout(limit)),
    }
}

impl ClientConnection {
    pub fn session(&self) -> &ClientSession {
        &self.session
    }

    /// Waits for the next socket event. Cancel-safe.
    pub async fn recv(&mut self) -> Incoming {
        self.incoming.recv().await.unwrap_or(Incoming::Closed)
    }

    /// Applies what [`recv`](Self::recv) returned, answering heartbeats.
    /// Not cancel-safe; await it outside `select!`.
    pub async fn process(&mut self, incoming: Incoming) -> Vec<ClientEvent> {
        let Applied { events, reply } = match incoming {
            Incoming::Line(line) => self.session.apply_line(&line),
            Incoming::Closed => self.session.connection_lost(),
        };
        if let Some(reply) = reply {
            if self.write(&reply).await.is_err() {
                let mut events = events;
                events.extend(self.session.connection_lost().events);
                return events;
            }
        }
        if self.session.is_closed() {
            let _ = self.writer.shutdown().await;
        }
        events
    }

    /// Handles one line of user input. Returns the events produced locally
    /// (input errors); server reactions arrive through `recv`.
    pub async fn submit(&mut self, text: &str) -> Vec<ClientEvent> {
        match self.session.submit_input(text) {
            Submission::Local(event) => vec![event],
            Submission::Send(frame) => {
                let quitting = frame == WireFrame::Quit;
                if self.write(&frame).await.is_err() {
                    return self.session.connection_lost().events;
                }
                if quitting {
                    let _ = self.writer.shutdown().await;
                    return vec![ClientEvent::Disconnected(DisconnectReason::Quit)];
                }
                Vec::new()
            }
        }
    }

    pub async fn quit(&mut self) -> Vec<ClientEvent> {
        if matches!(self.session.phase(), ClientPhase::Active { .. }) {
            self.submit(crate::protocol::QUIT_COMMAND).await
        } else {
            Vec::new()
        }
    }

    async fn write(&mut self, frame: &WireFrame) -> io::Result<()> {
        self.writer.write_all(encode_frame(frame).as_bytes()).await
    }
}

impl Drop for ClientConnection {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

async fn read_loop(mut reader: BufReader<OwnedReadHalf>, tx: mpsc::UnboundedSender<Incoming>) {
    let mut buf = Vec::new();
    while let Ok(Some(line)) = read_line(&mut reader, &mut buf).await {
        if tx.send(Incoming::Line(line.to_vec())).is_err() {
            return;
        }
    }
    let _ = tx.send(Incoming::Closed);
}
