//! Canned inputs shared by tests, benchmarks, and the bundled example data.

use std::collections::BTreeMap;

use rand::Rng;

use crate::demand::DemandConfig;
use crate::network::{Area, Edge, Network, Node};

/// Edge list of the six-node demonstration network, 0-based, all unit length.
const SIX_NODE_EDGES: [(usize, usize); 9] =
    [(0, 1), (0, 2), (1, 3), (3, 4), (2, 4), (0, 5), (3, 5), (1, 5), (4, 5)];

/// Area labels of the demonstration network: nodes 1 and 2 residential,
/// 4 and 5 commercial, 3 and 6 other (1-based ids).
const SIX_NODE_AREAS: [Area; 6] = [
    Area::Residential,
    Area::Residential,
    Area::Other,
    Area::Commercial,
    Area::Commercial,
    Area::Other,
];

/// Six-node, nine-road demonstration network with unit edge lengths and
/// mixed area labels. Degrees are (3, 3, 2, 3, 3, 4) for nodes 1..=6.
pub fn six_node_network() -> Network {
    let nodes = (0..6).map(|id| Node::new(id, SIX_NODE_AREAS[id])).collect();
    let edges = SIX_NODE_EDGES.iter().map(|&(a, b)| Edge::new(a, b, 1.0)).collect();
    Network::new(nodes, edges).expect("fixture network is valid")
}

/// Node-by-road incidence matrix of [`six_node_network`] plus unit lengths.
pub fn six_node_incidence() -> (Vec<Vec<u8>>, Vec<f64>) {
    let mut matrix = vec![vec![0u8; SIX_NODE_EDGES.len()]; 6];
    for (col, &(a, b)) in SIX_NODE_EDGES.iter().enumerate() {
        matrix[a][col] = 1;
        matrix[b][col] = 1;
    }
    (matrix, vec![1.0; SIX_NODE_EDGES.len()])
}

/// Demand config behind the golden trip set `fixtures/trips_seed7.json`:
/// 100 trips, seed 7, residential-to-commercial trips four times as likely
/// as any other area pair, initial SOC uniform in [0.25, 0.75] of a
/// 2.0-unit battery.
pub fn golden_demand_config() -> DemandConfig {
    let mut pair_weights = BTreeMap::new();
    for a in Area::ALL {
        for b in Area::ALL {
            pair_weights.insert((a, b), 1.0);
        }
    }
    pair_weights.insert((Area::Residential, Area::Commercial), 4.0);
    DemandConfig {
        trip_count: 100,
        pair_weights,
        soc_ini_range: (0.25, 0.75),
        capacity: 2.0,
        seed: 7,
    }
}

/// Random connected network: a random spanning tree plus up to
/// `extra_edges` additional random edges. Lengths are integers in 1..=9
/// (exact in f64, so test oracles can compare distances without tolerance)
/// and areas cycle residential, commercial, other.
pub fn random_connected_network(n: usize, extra_edges: usize, rng: &mut impl Rng) -> Network {
    assert!(n >= 1);
    let nodes = (0..n).map(|id| Node::new(id, Area::ALL[id % 3])).collect();
    let mut edges: Vec<Edge> = (1..n)
        .map(|v| Edge::new(rng.gen_range(0..v), v, rng.gen_range(1..=9) as f64))
        .collect();
    let mut attempts = 0;
    let mut added = 0;
    while added < extra_edges && attempts < 4 * extra_edges.max(1) {
        attempts += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if edges.iter().any(|e| e.a == a && e.b == b) {
            continue;
        }
        edges.push(Edge::new(a, b, rng.gen_range(1..=9) as f64));
        added += 1;
    }
    Network::new(nodes, edges).expect("tree construction keeps the graph connected")
}
