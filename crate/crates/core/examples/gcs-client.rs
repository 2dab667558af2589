//! Terminal client.
//!
//! ```text
//! cargo run --example gcs-client -- --host 127.0.0.1 --port 5000 --id alice
//! ```
//!
//! Type a line to broadcast it, `@bob text` for a private message,
//! `@<coordinator> /memberdetails` for the roster and `/quit` to leave.

use clap::Parser;
use gcs::cli::{self, ClientArgs};

#[tokio::main]
async fn main() {
    let status = cli::run(ClientArgs::parse()).await;
    // stdin is read on a blocking thread that would keep the runtime alive.
    std::process::exit(status.code());
}
