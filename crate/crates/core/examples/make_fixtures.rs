//! Regenerates the bundled fixture files: the six-node demonstration
//! network, the golden demand config, and the golden trip set it produces.
//!
//! Run from the workspace root:
//!
//! ```text
//! cargo run -p pevsim --example make_fixtures -- crates/core/fixtures
//! ```

use std::path::PathBuf;

use pevsim::demand::{generate_trips, save_trips};
use pevsim::fixtures::{golden_demand_config, six_node_network};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("crates/core/fixtures"));
    std::fs::create_dir_all(&dir).expect("create fixture directory");

    let net = six_node_network();
    net.save_json(dir.join("network_six_node.json")).expect("write network");

    let cfg = golden_demand_config();
    std::fs::write(dir.join("demand_seed7.json"), cfg.to_json_string())
        .expect("write demand config");

    let trips = generate_trips(&net, &cfg).expect("generate golden trips");
    save_trips(&trips, dir.join("trips_seed7.json")).expect("write trips");

    println!("fixtures written to {}", dir.display());
}
