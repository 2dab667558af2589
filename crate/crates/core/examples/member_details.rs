//! Asking the coordinator for the roster, and asking someone else.

use gcs::cli::render_event;
use gcs::sim::SimNetwork;

fn main() {
    let mut net = SimNetwork::default();
    for name in ["alice", "bob", "carol"] {
        net.join(name).unwrap();
    }
    net.input("carol", "@alice /memberdetails").unwrap();
    net.input("carol", "@bob /memberdetails").unwrap();
    net.run_until_quiescent();

    for event in net.client("carol").unwrap().events() {
        for line in render_event(event) {
            println!("{line}");
        }
    }
}
