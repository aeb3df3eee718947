//! Charging-station siting for plug-in electric vehicles on road networks.
//!
//! The library covers the full pipeline: model a road network as a weighted
//! undirected graph ([`network`]), generate seeded OD trip demand between
//! land-use areas ([`demand`]), score a station deployment by simulating
//! each trip's forced recharge detours ([`evaluation`]), and search for the
//! best fixed-size deployment with a cardinality-preserving genetic
//! algorithm validated by an exhaustive oracle ([`optimizer`]).
//!
//! Everything is deterministic given the input files and seeds; scoring may
//! run in parallel without changing any result.

pub mod demand;
pub mod evaluation;
pub mod fixtures;
pub mod network;
pub mod optimizer;

pub use demand::{generate_trips, DemandConfig, DemandError, Trip};
pub use evaluation::{
    deployment_score, fitness, trip_score, Deployment, EvalError, EvalParams,
};
pub use network::{Area, Edge, Network, NetworkError, Node, NodeId, PathResult};
pub use optimizer::{
    brute_force, run_ga, BruteForceResult, GaConfig, GaResult, OptimizerError,
};
