use std::process::ExitCode;

use clap::Parser;
use gcs::server::{self, ServerArgs};

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let config = ServerArgs::parse().config();
    let handle = match server::start(config).await {
        Ok(handle) => handle,
        Err(e) => {
            eprintln!("gcs-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(gateway) = handle.gateway() {
        eprintln!("gcs-server: gateway on {}", gateway.local_addr());
    }
    let _ = tokio::signal::ctrl_c().await;
    handle.shutdown().await;
    ExitCode::SUCCESS
}
