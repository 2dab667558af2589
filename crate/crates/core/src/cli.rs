//! Line-oriented terminal client.

use std::io::Write;

use clap::Parser;
use tokio::io::{AsyncBufRead, AsyncBufReadExt};

use crate::client::{connect_and_join, ClientEvent, DisconnectReason, JoinError, MessageKind};
use crate::protocol::{ErrorCode, MemberId};

#[derive(Debug, Clone, Parser)]
#[command(name = "gcs-client", about = "Join a chat group from the terminal")]
pub struct ClientArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub port: u16,
    /// Prompted for when omitted.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Graceful = 0,
    ConnectionError = 1,
    ProtocolError = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn after(reason: DisconnectReason) -> Self {
        match reason {
            DisconnectReason::Quit => ExitStatus::Graceful,
            DisconnectReason::ConnectionLost | DisconnectReason::Timeout => ExitStatus::ConnectionError,
            DisconnectReason::Rejected(_) | DisconnectReason::ProtocolError => ExitStatus::ProtocolError,
        }
    }

    fn after_join(e: &JoinError) -> Self {
        if e.is_connection_error() {
            ExitStatus::ConnectionError
        } else {
            ExitStatus::ProtocolError
        }
    }
}

/// Display lines for one event. Only a roster spans several lines, one per
/// member.
pub fn render_event(event: &ClientEvent) -> Vec<String> {
    let line = match event {
        ClientEvent::Joined { own_id, coordinator } => {
            format!("*** joined as {own_id}; coordinator is {coordinator}")
        }
        ClientEvent::PeerJoined(id) => format!("*** {id} joined"),
        ClientEvent::PeerLeft(id, reason) => format!("*** {id} left ({reason})"),
        ClientEvent::NewCoordinator(id) => format!("*** {id} is now the coordinator"),
        ClientEvent::Message { ts, from, body, kind: MessageKind::Public } => format!("[{ts}] {from}: {body}"),
        ClientEvent::Message { ts, from, body, kind: MessageKind::Private } => {
            format!("[{ts}] {from} (private): {body}")
        }
        ClientEvent::Roster(entries) => {
            return entries
                .iter()
                .map(|e| format!("  {:<16} {:<15} {}", e.id.as_str(), e.ip.to_string(), e.port))
                .collect();
        }
        ClientEvent::Error { fault, text } => format!("!!! {}: {text}", fault.code()),
        ClientEvent::Disconnected(reason) => format!("*** disconnected: {reason}"),
    };
    vec![line]
}

fn join_failure(e: &JoinError) -> String {
    match e {
        JoinError::ConnectionRefused { endpoint, .. } => format!("!!! cannot join: connection refused by {endpoint}"),
        JoinError::DuplicateId(id) => format!("!!! cannot join: {}: {id} is already taken", ErrorCode::DuplicateId),
        JoinError::HandshakeTimeout(limit) => {
            format!("!!! cannot join: no welcome from server within {}s", limit.as_secs())
        }
        other => format!("!!! cannot join: {other}"),
    }
}

pub async fn run(args: ClientArgs) -> ExitStatus {
    let input = tokio::io::BufReader::new(tokio::io::stdin());
    let mut out = std::io::stdout();
    run_with_io(&args.host, args.port, args.id.as_deref(), input, &mut out).await
}

/// The client loop over arbitrary input and output. Each input line is
/// submitted once; end of input quits gracefully.
pub async fn run_with_io<R, W>(host: &str, port: u16, id: Option<&str>, input: R, out: &mut W) -> ExitStatus
where
    R: AsyncBufRead + Unpin,
    W: Write,
{
    let mut lines = input.lines();
    let id = match id {
        Some(raw) => match MemberId::new(raw) {
            Ok(id) => id,
            Err(e) => {
                emit(out, &format!("!!! {e}"));
                return ExitStatus::ProtocolError;
            }
        },
        None => match prompt_id(&mut lines, out).await {
            Some(id) => id,
            None => return ExitStatus::Graceful,
        },
    };

    let (mut conn, joined) = match connect_and_join(host, port, id).await {
        Ok(ok) => ok,
        Err(e) => {
            emit(out, &join_failure(&e));
            return ExitStatus::after_join(&e);
        }
    };
    show(out, &[joined]);

    loop {
        let events = tokio::select! {
            line = lines.next_line() => match line {
                Ok(Some(line)) => conn.submit(&line).await,
                Ok(None) | Err(_) => conn.quit().await,
            },
            incoming = conn.recv() => conn.process(incoming).await,
        };
        show(out, &events);
        if let Some(ClientEvent::Disconnected(reason)) =
            events.iter().find(|e| matches!(e, ClientEvent::Disconnected(_)))
        {
            return ExitStatus::after(*reason);
        }
    }
}

async fn prompt_id<R, W>(lines: &mut tokio::io::Lines<R>, out: &mut W) -> Option<MemberId>
where
    R: AsyncBufRead + Unpin,
    W: Write,
{
    loop {
        let _ = write!(out, "id: ");
        let _ = out.flush();
        let line = lines.next_line().await.ok().flatten()?;
        match MemberId::new(line.trim()) {
            Ok(id) => return Some(id),
            Err(e) => emit(out, &format!("!!! {e}")),
        }
    }
}

fn show<W: Write>(out: &mut W, events: &[ClientEvent]) {
    for event in events {
        for line in render_event(event) {
            emit(out, &line);
        }
    }
}

fn emit<W: Write>(out: &mut W, line: &str) {
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::Fault;
    use crate::protocol::{Body, LeaveReason, MemberEntry, Timestamp};
    use std::net::Ipv4Addr;

    fn id(s: &str) -> MemberId {
        MemberId::new(s).unwrap()
    }

    #[test]
    fn golden_render_table() {
        let ts: Timestamp = "2024-03-01 10:00:00".parse().unwrap();
        let cases: Vec<(ClientEvent, Vec<&str>)> = vec![
            (
                ClientEvent::Joined { own_id: id("alice"), coordinator: id("alice") },
                vec!["*** joined as alice; coordinator is alice"],
            ),
            (ClientEvent::PeerJoined(id("bob")), vec!["*** bob joined"]),
            (ClientEvent::PeerLeft(id("bob"), LeaveReason::Timeout), vec!["*** bob left (timeout)"]),
            (ClientEvent::NewCoordinator(id("bob")), vec!["*** bob is now the coordinator"]),
            (
                ClientEvent::Message { ts, from: id("bob"), body: Body::new("hi").unwrap(), kind: MessageKind::Public },
                vec!["[2024-03-01 10:00:00] bob: hi"],
            ),
            (
                ClientEvent::Message {
                    ts,
                    from: id("bob"),
                    body: Body::new("psst").unwrap(),
                    kind: MessageKind::Private,
                },
                vec!["[2024-03-01 10:00:00] bob (private): psst"],
            ),
            (
                ClientEvent::Roster(vec![
                    MemberEntry::new(id("alice"), Ipv4Addr::LOCALHOST, 5001),
                    MemberEntry::new(id("bob"), Ipv4Addr::new(10, 0, 0, 2), 5002),
                ]),
                vec!["  alice            127.0.0.1       5001", "  bob              10.0.0.2        5002"],
            ),
            (
                ClientEvent::Error { fault: Fault::Server(ErrorCode::NotCoordinator), text: "ask alice".into() },
                vec!["!!! not_coordinator: ask alice"],
            ),
            (ClientEvent::Disconnected(DisconnectReason::Timeout), vec!["*** disconnected: timeout"]),
        ];
        for (event, expected) in cases {
            assert_eq!(render_event(&event), expected, "{event:?}");
        }
    }

    #[test]
    fn exit_classes() {
        assert_eq!(ExitStatus::after(DisconnectReason::Quit).code(), 0);
        assert_eq!(ExitStatus::after(DisconnectReason::ConnectionLost).code(), 1);
        assert_eq!(ExitStatus::after(DisconnectReason::ProtocolError).code(), 2);
    }

    #[test]
    fn args_parse() {
        let args = ClientArgs::try_parse_from(["gcs-client", "--port", "5000", "--id", "alice"]).unwrap();
        assert_eq!(args.host, "127.0.0.1");
        assert_eq!(args.port, 5000);
        assert_eq!(args.id.as_deref(), Some("alice"));
    }
}
