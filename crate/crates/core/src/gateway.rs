//! WebSocket to TCP bridge. Each WebSocket connection on `/ws` gets its own
//! TCP connection to the chat server; one text message is one protocol line
//! without its `\n`, in both directions. `GET /` serves the browser console.

use std::io;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use clap::Parser;
use thiserror::Error;
use tokio::io::{AsyncWriteExt, BufReader};
use tokio::net::tcp::OwnedReadHalf;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use crate::line::read_line;

// 1014 is refused by common WebSocket stacks; 45xx sits in the application range.
pub const CLOSE_UPSTREAM_UNREACHABLE: (u16, &str) = (4502, "upstream_unreachable");
pub const CLOSE_UPSTREAM_CLOSED: (u16, &str) = (1001, "upstream_closed");
pub const CLOSE_BAD_FRAME: (u16, &str) = (1008, "bad_frame");
pub const CLOSE_BINARY: (u16, &str) = (1003, "bad_frame");
pub const CLOSE_SHUTDOWN: (u16, &str) = (1001, "gateway_shutdown");

const PLACEHOLDER_INDEX: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>gcs gateway</title></head>
<body><p>Group chat gateway. Connect a WebSocket client to <code>/ws</code>; one text message is one protocol line.</p></body></html>
";

#[derive(Debug, Clone, Parser)]
#[command(name = "gcs-gateway", about = "Bridge browser WebSocket clients to a chat server")]
pub struct GatewayArgs {
    /// Port for HTTP and WebSocket clients.
    #[arg(long)]
    pub listen: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub server_host: String,
    #[arg(long)]
    pub server_port: u16,
    #[arg(long, default_value_t = Ipv4Addr::LOCALHOST)]
    pub bind: Ipv4Addr,
    /// Directory with the console's static files.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

impl GatewayArgs {
    pub fn config(&self) -> GatewayConfig {
        GatewayConfig {
            listen: SocketAddrV4::new(self.bind, self.listen),
            server_host: self.server_host.clone(),
            server_port: self.server_port,
            assets: self.assets.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub listen: SocketAddrV4,
    pub server_host: String,
    pub server_port: u16,
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot listen on {endpoint}: {source}")]
    Bind { endpoint: SocketAddrV4, source: io::Error },
}

#[derive(Debug)]
pub struct GatewayHandle {
    local_addr: SocketAddrV4,
    shutdown: watch::Sender<bool>,
    task: Option<JoinHandle<()>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddrV4 {
        self.local_addr
    }

    /// Stops accepting and closes every bridge.
    pub async fn shutdown(mut self) {
        let _ = self.shutdown.send(true);
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        let _ = self.shutdown.send(true);
    }
}

#[derive(Clone)]
struct Upstream {
    host: Arc<str>,
    port: u16,
    shutdown: watch::Receiver<bool>,
}

/// Gateway on 127.0.0.1:`listen_port` with the built-in index page.
pub async fn serve_gateway(
    listen_port: u16,
    server_host: String,
    server_port: u16,
) -> Result<GatewayHandle, GatewayError> {
    serve(GatewayConfig {
        listen: SocketAddrV4::new(Ipv4Addr::LOCALHOST, listen_port),
        server_host,
        server_port,
        assets: None,
    })
    .await
}

pub async fn serve(config: GatewayConfig) -> Result<GatewayHandle, GatewayError> {
    let listener = TcpListener::bind(config.listen)
        .await
        .map_err(|source| GatewayError::Bind { endpoint: config.listen, source })?;
    let local_addr = match listener.local_addr() {
        Ok(SocketAddr::V4(addr)) => addr,
        Ok(SocketAddr::V6(_)) => unreachable!("bound to an IPv4 address"),
        Err(source) => return Err(GatewayError::Bind { endpoint: config.listen, source }),
    };

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let upstream =
        Upstream { host: config.server_host.into(), port: config.server_port, shutdown: shutdown_rx.clone() };
    let router = axum::Router::new().route("/ws", get(upgrade));
    let router = match config.assets {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    let app = router.with_state(upstream);

    let mut stop = shutdown_rx;
    let task = tokio::spawn(async move {
        let server = axum::serve(listener, app).with_graceful_shutdown(async move {
            let _ = stop.wait_for(|s| *s).await;
        });
        if let Err(e) = server.await {
            tracing::warn!(error = %e, "gateway stopped");
        }
    });
    tracing::info!(%local_addr, "gateway listening");
    Ok(GatewayHandle { local_addr, shutdown: shutdown_tx, task: Some(task) })
}

async fn upgrade(ws: WebSocketUpgrade, State(upstream): State<Upstream>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| bridge(socket, upstream))
}

fn close((code, reason): (u16, &str)) -> Message {
    Message::Close(Some(CloseFrame { code, reason: reason.into() }))
}

enum Upward {
    Line(String),
    Closed,
}

async fn bridge(mut ws: WebSocket, mut upstream: Upstream) {
    let stream = match TcpStream::connect((&*upstream.host, upstream.port)).await {
        Ok(stream) => stream,
        Err(e) => {
            tracing::debug!(error = %e, "upstream unreachable");
            let _ = ws.send(close(CLOSE_UPSTREAM_UNREACHABLE)).await;
            return;
        }
    };
    let (read_half, mut writer) = stream.into_split();
    let (tx, mut lines) = mpsc::unbounded_channel();
    let reader = tokio::spawn(pump_lines(BufReader::new(read_half), tx));

    loop {
        tokio::select! {
            _ = upstream.shutdown.changed() => {
                let _ = ws.send(close(CLOSE_SHUTDOWN)).await;
                break;
            }
            from_server = lines.recv() => match from_server {
                Some(Upward::Line(line)) => {
                    if ws.send(Message::Text(line.into())).await.is_err() {
                        break;
                    }
                }
                Some(Upward::Closed) | None => {
                    let _ = ws.send(close(CLOSE_UPSTREAM_CLOSED)).await;
                    break;
                }
            },
            from_browser = ws.recv() => match from_browser {
                Some(Ok(Message::Text(text))) => {
                    if text.contains(['\n', '\r']) {
                        let _ = ws.send(close(CLOSE_BAD_FRAME)).await;
                        break;
                    }
                    let mut line = String::with_capacity(text.len() + 1);
                    line.push_str(&text);
                    line.push('\n');
                    if writer.write_all(line.as_bytes()).await.is_err() {
                        let _ = ws.send(close(CLOSE_UPSTREAM_CLOSED)).await;
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let _ = ws.send(close(CLOSE_BINARY)).await;
                    break;
                }
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => {}
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
            },
        }
    }
    let _ = writer.shutdown().await;
    reader.abort();
}

async fn pump_lines(mut reader: BufReader<OwnedReadHalf>, tx: mpsc::UnboundedSender<Upward>) {
    let mut buf = Vec::new();
    while let Ok(Some(line)) = read_line(&mut reader, &mut buf).await {
        let Ok(text) = std::str::from_utf8(line) else { break };
        if tx.send(Upward::Line(text.to_owned())).is_err() {
            return;
        }
    }
    let _ = tx.send(Upward::Closed);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn args_parse() {
        let args = GatewayArgs::try_parse_from([
            "gcs-gateway",
            "--listen",
            "8080",
            "--server-host",
            "10.0.0.1",
            "--server-port",
            "5000",
        ])
        .unwrap();
        let config = args.config();
        assert_eq!(config.listen.to_string(), "127.0.0.1:8080");
        assert_eq!(config.server_host, "10.0.0.1");
        assert_eq!(config.server_port, 5000);
    }
}
