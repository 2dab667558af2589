//! Three members chatting in the simulator: broadcasts, a private message
//! and a graceful quit. Prints the transcript and the server log.

use gcs::sim::SimNetwork;

fn main() {
    let mut net = SimNetwork::default();
    for name in ["alice", "bob", "carol"] {
        net.join(name).unwrap();
    }
    net.input("alice", "hello everyone").unwrap();
    net.input("bob", "@carol lunch later?").unwrap();
    net.input("carol", "/quit").unwrap();
    net.run_until_quiescent();
    net.input("alice", "where did carol go").unwrap();
    net.run_until_quiescent();

    println!("-- transcript");
    for entry in net.transcript() {
        println!("{entry}");
    }
    println!("-- server log");
    for line in net.log_lines() {
        println!("{line}");
    }
}
