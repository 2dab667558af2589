//! Coordinator-based group chat over TCP.
//!
//! * [`protocol`]: line-oriented wire format, domain types and user input parsing.
//! * [`registry`]: group membership and coordinator election.
//! * [`server`]: TCP server built around a single routing sequencer.
//! * [`client`]: transport-agnostic client state machine and a TCP connection.
//! * [`cli`]: terminal client.
//! * [`sim`]: deterministic in-memory network for scripted scenarios.
//! * [`gateway`]: WebSocket to TCP bridge for browser clients.

pub mod cli;
pub mod client;
pub mod gateway;
mod line;
pub mod protocol;
pub mod registry;
pub mod server;
pub mod sim;

pub use line::MAX_LINE_BYTES;
