//! A client that stops answering PINGs is removed after
//! (misses + 1) x interval of silence.

use gcs::sim::SimNetwork;

fn main() {
    let mut net = SimNetwork::default();
    net.join("alice").unwrap();
    net.join("bob").unwrap();
    net.set_silent("bob", true).unwrap();

    for _ in 0..4 {
        net.advance_time(5);
        let members: Vec<_> = net.registry().members().iter().map(|m| m.id.to_string()).collect();
        println!("{} members: {}", net.now(), members.join(", "));
    }
    println!("-- server log");
    for line in net.log_lines() {
        println!("{line}");
    }
}
