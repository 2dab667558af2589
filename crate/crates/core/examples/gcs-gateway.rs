//! WebSocket gateway in front of a running server.
//!
//! ```text
//! cargo run --example gcs-gateway -- --listen 8080 --server-host 127.0.0.1 --server-port 5000
//! ```
//!
//! Browsers load `/` and talk the line protocol over `/ws`.

use std::process::ExitCode;

use clap::Parser;
use gcs::gateway::{self, GatewayArgs};

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let args = GatewayArgs::parse();
    let handle = match gateway::serve(args.config()).await {
        Ok(handle) => handle,
        Err(e) => {
            eprintln!("gcs-gateway: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("gcs-gateway: http://{} -> {}:{}", handle.local_addr(), args.server_host, args.server_port);
    let _ = tokio::signal::ctrl_c().await;
    handle.shutdown().await;
    ExitCode::SUCCESS
}
