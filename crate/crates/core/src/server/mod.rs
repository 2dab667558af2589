//! The central server: TCP listener, per-connection handlers, the routing
//! sequencer, heartbeats and the interaction log.

mod log;
mod net;
mod router;
mod session;

use std::fmt;
use std::io;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use thiserror::Error;

pub use self::log::{EventLog, LogCapture, LogEntry, LogKind};
pub use net::{start, start_with, HandlerFactory, ServerHandle, SessionHandler};
pub use router::{ConnId, Dispatch, Router};
pub use session::{
    handle_bad_frame, handle_frame, heartbeat_sweep, on_disconnect, CloseReason, Destination, Effects, Nonces, Phase,
    SessionState, SweepAction, MAX_BAD_FRAMES,
};

pub const DEFAULT_HEARTBEAT_INTERVAL: Duration = Duration::from_secs(5);
pub const DEFAULT_HEARTBEAT_MISSES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub bind_ip: Ipv4Addr,
    /// 0 asks the OS for a free port.
    pub bind_port: u16,
    pub heartbeat_interval: Duration,
    pub heartbeat_misses: u32,
    /// `None` logs to standard output.
    pub log_path: Option<PathBuf>,
    /// Also serve the WebSocket gateway on this port.
    pub gateway_port: Option<u16>,
}

impl ServerConfig {
    pub fn new(bind_ip: Ipv4Addr, bind_port: u16) -> Self {
        ServerConfig {
            bind_ip,
            bind_port,
            heartbeat_interval: DEFAULT_HEARTBEAT_INTERVAL,
            heartbeat_misses: DEFAULT_HEARTBEAT_MISSES,
            log_path: None,
            gateway_port: None,
        }
    }

    pub fn endpoint(&self) -> SocketAddrV4 {
        SocketAddrV4::new(self.bind_ip, self.bind_port)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.heartbeat_interval.is_zero() {
            return Err(ConfigError::ZeroHeartbeatInterval);
        }
        if self.heartbeat_misses == 0 {
            return Err(ConfigError::ZeroHeartbeatMisses);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "gcs-server", about = "Run the group chat server")]
pub struct ServerArgs {
    #[arg(long, env = "GCS_IP")]
    pub ip: Ipv4Addr,
    #[arg(long, env = "GCS_PORT")]
    pub port: u16,
    /// Seconds between heartbeat sweeps.
    #[arg(long, default_value_t = DEFAULT_HEARTBEAT_INTERVAL.as_secs())]
    pub heartbeat_interval: u64,
    /// Unanswered PINGs tolerated before a member is removed.
    #[arg(long, default_value_t = DEFAULT_HEARTBEAT_MISSES)]
    pub heartbeat_misses: u32,
    /// Append the interaction log here instead of standard output.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Also serve the WebSocket gateway on this port.
    #[arg(long)]
    pub gateway_port: Option<u16>,
}

impl ServerArgs {
    pub fn config(&self) -> ServerConfig {
        ServerConfig {
            bind_ip: self.ip,
            bind_port: self.port,
            heartbeat_interval: Duration::from_secs(self.heartbeat_interval),
            heartbeat_misses: self.heartbeat_misses,
            log_path: self.log.clone(),
            gateway_port: self.gateway_port,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("heartbeat interval must be greater than zero")]
    ZeroHeartbeatInterval,
    #[error("heartbeat misses must be at least 1")]
    ZeroHeartbeatMisses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindErrorKind {
    PortInUse,
    PermissionDenied,
    AddressUnavailable,
    Other,
}

impl BindErrorKind {
    fn from_io(kind: io::ErrorKind) -> Self {
        match kind {
            io::ErrorKind::AddrInUse => BindErrorKind::PortInUse,
            io::ErrorKind::PermissionDenied => BindErrorKind::PermissionDenied,
            io::ErrorKind::AddrNotAvailable => BindErrorKind::AddressUnavailable,
            _ => BindErrorKind::Other,
        }
    }
}

impl fmt::Display for BindErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindErrorKind::PortInUse => "port already in use",
            BindErrorKind::PermissionDenied => "permission denied",
            BindErrorKind::AddressUnavailable => "address not available on this host",
            BindErrorKind::Other => "bind failed",
        })
    }
}

#[derive(Debug, Error)]
#[error("cannot bind {endpoint}: {kind}")]
pub struct BindError {
    pub endpoint: SocketAddrV4,
    pub kind: BindErrorKind,
    #[source]
    pub source: Option<io::Error>,
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("cannot open log file {path}: {source}")]
    LogFile { path: PathBuf, source: io::Error },
    #[error("gateway failed to start: {0}")]
    Gateway(#[from] crate::gateway::GatewayError),
}
