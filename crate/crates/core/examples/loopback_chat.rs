//! A real TCP server on an OS-assigned loopback port with two clients.

use std::net::Ipv4Addr;

use gcs::cli::render_event;
use gcs::client::{connect_and_join, ClientEvent, MessageKind};
use gcs::protocol::MemberId;
use gcs::server::{self, ServerConfig};

#[tokio::main]
async fn main() {
    let server = server::start(ServerConfig::new(Ipv4Addr::LOCALHOST, 0)).await.expect("server starts");
    let port = server.local_addr().port();

    let (mut alice, _) = connect_and_join("127.0.0.1", port, MemberId::new("alice").unwrap()).await.unwrap();
    let (mut bob, _) = connect_and_join("127.0.0.1", port, MemberId::new("bob").unwrap()).await.unwrap();

    bob.submit("hi alice").await;
    bob.submit("@alice just you").await;
    // Print what alice sees up to and including the private message.
    let mut done = false;
    while !done {
        let incoming = alice.recv().await;
        for event in alice.process(incoming).await {
            done |= matches!(event, ClientEvent::Message { kind: MessageKind::Private, .. });
            for line in render_event(&event) {
                println!("alice | {line}");
            }
        }
    }
    bob.quit().await;
    alice.quit().await;
    server.shutdown().await;
}
