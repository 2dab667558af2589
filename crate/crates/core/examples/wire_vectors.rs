//! Prints the golden wire vectors as JSON.
//!
//! ```text
//! cargo run --example wire_vectors > crates/core/testdata/wire_vectors.json
//! ```

fn main() {
    let vectors = gcs::protocol::golden_vectors();
    println!("{}", serde_json::to_string_pretty(&vectors).expect("vectors serialize"));
}
