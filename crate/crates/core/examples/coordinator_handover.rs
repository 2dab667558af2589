//! The coordinator's connection drops without QUIT; the oldest survivor
//! takes over.

use gcs::cli::render_event;
use gcs::sim::SimNetwork;

fn main() {
    let mut net = SimNetwork::default();
    for name in ["alice", "bob", "carol"] {
        net.join(name).unwrap();
    }
    println!("coordinator: {}", net.registry().coordinator().unwrap());
    net.drop_connection("alice").unwrap();
    net.run_until_quiescent();
    println!("coordinator: {}", net.registry().coordinator().unwrap());

    println!("-- carol sees");
    for event in net.client("carol").unwrap().events() {
        for line in render_event(event) {
            println!("{line}");
        }
    }
}
