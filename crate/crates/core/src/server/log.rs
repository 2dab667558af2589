//! Timestamped interaction log.
//!
//! One line per entry: `[YYYY-MM-DD HH:MM:SS] KIND key=value ...`.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::net::SocketAddrV4;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::protocol::{ErrorCode, LeaveReason, MemberId, Timestamp};
use crate::registry::Member;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogKind {
    Join,
    Leave,
    Broadcast,
    Private,
    Details,
    CoordChange,
    Error,
    PingTimeout,
    Bind,
}

impl LogKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::Join => "JOIN",
            LogKind::Leave => "LEAVE",
            LogKind::Broadcast => "BROADCAST",
            LogKind::Private => "PRIVATE",
            LogKind::Details => "DETAILS",
            LogKind::CoordChange => "COORD_CHANGE",
            LogKind::Error => "ERROR",
            LogKind::PingTimeout => "PING_TIMEOUT",
            LogKind::Bind => "BIND",
        }
    }
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub ts: Timestamp,
    pub kind: LogKind,
    pub detail: String,
}

impl LogEntry {
    pub fn new(ts: Timestamp, kind: LogKind, detail: impl Into<String>) -> Self {
        LogEntry { ts, kind, detail: detail.into() }
    }

    pub fn bind(ts: Timestamp, endpoint: SocketAddrV4) -> Self {
        Self::new(ts, LogKind::Bind, format!("endpoint={endpoint}"))
    }

    pub fn join(ts: Timestamp, member: &Member) -> Self {
        Self::new(ts, LogKind::Join, format!("id={} ip={} port={}", member.id, member.ip, member.port))
    }

    pub fn leave(ts: Timestamp, id: &MemberId, reason: LeaveReason) -> Self {
        Self::new(ts, LogKind::Leave, format!("id={id} reason={reason}"))
    }

    /// A connection that closed before it ever joined.
    pub fn abandoned(ts: Timestamp, peer: SocketAddrV4) -> Self {
        Self::new(ts, LogKind::Leave, format!("peer={peer} reason=error joined=false"))
    }

    pub fn broadcast(ts: Timestamp, from: &MemberId, len: usize) -> Self {
        Self::new(ts, LogKind::Broadcast, format!("from={from} len={len}"))
    }

    pub fn private(ts: Timestamp, from: &MemberId, to: &MemberId, len: usize) -> Self {
        Self::new(ts, LogKind::Private, format!("from={from} to={to} len={len}"))
    }

    pub fn details(ts: Timestamp, from: &MemberId, coordinator: &MemberId, count: usize) -> Self {
        Self::new(ts, LogKind::Details, format!("from={from} coordinator={coordinator} count={count}"))
    }

    pub fn coord_change(ts: Timestamp, id: &MemberId) -> Self {
        Self::new(ts, LogKind::CoordChange, format!("id={id}"))
    }

    pub fn error(ts: Timestamp, peer: SocketAddrV4, code: ErrorCode, reason: &str) -> Self {
        Self::new(ts, LogKind::Error, format!("peer={peer} code={code} reason={reason:?}"))
    }

    pub fn ping_timeout(ts: Timestamp, id: &MemberId, missed: u32) -> Self {
        Self::new(ts, LogKind::PingTimeout, format!("id={id} missed={missed}"))
    }
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} {}", self.ts, self.kind, self.detail)
    }
}

enum Sink {
    Stdout,
    Writer(Box<dyn Write + Send>),
}

/// Append-only destination for [`LogEntry`] lines.
///
/// Each line is flushed as it is written. If the configured writer fails,
/// the log switches to standard output for good and prints a single warning
/// on standard error.
pub struct EventLog {
    sink: Sink,
}

impl EventLog {
    pub fn stdout() -> Self {
        EventLog { sink: Sink::Stdout }
    }

    /// Appends to `path`, creating it if needed.
    pub fn file(path: impl AsRef<Path>) -> io::Result<Self> {
        let file: File = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::writer(file))
    }

    pub fn writer(w: impl Write + Send + 'static) -> Self {
        EventLog { sink: Sink::Writer(Box::new(w)) }
    }

    /// A log kept in memory, plus a handle for reading it back.
    pub fn memory() -> (Self, LogCapture) {
        let capture = LogCapture::default();
        (Self::writer(capture.clone()), capture)
    }

    pub fn is_degraded_to_stdout(&self) -> bool {
        matches!(self.sink, Sink::Stdout)
    }

    pub fn append(&mut self, entry: &LogEntry) {
        let line = format!("{entry}\n");
        if let Sink::Writer(w) = &mut self.sink {
            match w.write_all(line.as_bytes()).and_then(|()| w.flush()) {
                Ok(()) => return,
                Err(e) => {
                    eprintln!("warning: interaction log unwritable ({e}); logging to standard output");
                    self.sink = Sink::Stdout;
                }
            }
        }
        let mut out = io::stdout().lock();
        // Nothing sensible remains if stdout itself is gone.
        let _ = out.write_all(line.as_bytes()).and_then(|()| out.flush());
    }
}

impl fmt::Debug for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sink = match self.sink {
            Sink::Stdout => "stdout",
            Sink::Writer(_) => "writer",
        };
        f.debug_struct("EventLog").field("sink", &sink).finish()
    }
}

/// Shared in-memory log buffer.
#[derive(Debug, Clone, Default)]
pub struct LogCapture(Arc<Mutex<Vec<u8>>>);

impl LogCapture {
    pub fn lines(&self) -> Vec<String> {
        let buf = self.0.lock().expect("log buffer poisoned");
        String::from_utf8_lossy(&buf).lines().map(str::to_owned).collect()
    }
}

impl Write for LogCapture {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().expect("log buffer poisoned").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
