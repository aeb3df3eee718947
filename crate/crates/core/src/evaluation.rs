//! Deployment scoring: greedy forced-detour trip simulation, the per-budget
//! unsatisfied-SOC values E_m, and the fit-value transform used by the
//! optimizer.
//!
//! A PEV walks its fixed route and consumes `rate` SOC per distance unit.
//! Whenever the remaining SOC cannot cover the next leg the vehicle must
//! detour to a station, recharge fully (one charge per detour), rejoin the
//! route at the next node, and continue. A trip that cannot reach any
//! station strands, leaving part of its route unsatisfied.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::Trip;
use crate::network::{Network, NodeId};

/// Set of station nodes; `k` is the set size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    stations: BTreeSet<NodeId>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("station id {0} not in network")]
    UnknownStation(usize),
    #[error("detour budget m={m} exceeds detour count n={n}")]
    IndexOutOfRange { m: usize, n: usize },
    #[error("invalid evaluation params: {0}")]
    InvalidParams(String),
}

impl Deployment {
    /// Builds a deployment from station ids, checking them against `net`.
    /// Duplicates collapse (set semantics). Error messages use 1-based ids.
    pub fn new(
        stations: impl IntoIterator<Item = NodeId>,
        net: &Network,
    ) -> Result<Self, EvalError> {
        let stations: BTreeSet<NodeId> = stations.into_iter().collect();
        for &s in &stations {
            if !net.contains_node(s) {
                return Err(EvalError::UnknownStation(s + 1));
            }
        }
        Ok(Deployment { stations })
    }

    /// Deployment at the positions of nonzero chromosome bits.
    pub fn from_chromosome(bits: &[u8]) -> Self {
        Deployment {
            stations: bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b != 0)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    /// Length-`n` 0/1 vector with ones at station positions.
    pub fn to_chromosome(&self, n: usize) -> Vec<u8> {
        let mut bits = vec![0u8; n];
        for &s in &self.stations {
            bits[s] = 1;
        }
        bits
    }

    pub fn stations(&self) -> &BTreeSet<NodeId> {
        &self.stations
    }

    pub fn k(&self) -> usize {
        self.stations.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.stations.contains(&node)
    }

    /// Station ids as they appear in files (1-based, ascending).
    pub fn file_ids(&self) -> Vec<usize> {
        self.stations.iter().map(|&s| s + 1).collect()
    }
}

/// Scoring coefficients: `alpha` weighs detour energy when stranded,
/// `beta` weighs the energy of the unfinished route, `rate` is SOC
/// consumption per distance unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub alpha: f64,
    pub beta: f64,
    pub rate: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { alpha: 1.0, beta: 2.0, rate: 1.0 }
    }
}

impl EvalParams {
    /// Requires beta >= 1, beta >= alpha >= 0, rate > 0: stranding must cost
    /// at least as much as detouring or the budget minimum degenerates.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.alpha < 0.0 || self.alpha.is_nan() {
            return Err(EvalError::InvalidParams(format!(
                "alpha must be nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 1.0 && self.beta >= self.alpha) {
            return Err(EvalError::InvalidParams(format!(
                "beta must satisfy beta >= 1 and beta >= alpha, got beta={} alpha={}",
                self.beta, self.alpha
            )));
        }
        if self.rate <= 0.0 || self.rate.is_nan() {
            return Err(EvalError::InvalidParams(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// One forced detour: at route node `at_node`, with `next_node` ahead, the
/// PEV recharges at `station`. `extra_soc` is the detour's energy excess
/// over the direct leg.
#[derive(Debug, Clone, PartialEq)]
pub struct DetourEvent {
    pub at_node: NodeId,
    pub station: NodeId,
    pub next_node: NodeId,
    pub extra_soc: f64,
}

/// Full record of the greedy simulation plus the per-budget bookkeeping
/// needed for E_m.
///
/// All three per-budget vectors have length n+1 where n = `events.len()`:
/// entry m describes the run that is allowed the first m greedy detours.
/// A budget-m run (m < n) strands at the (m+1)-th forced-detour point.
#[derive(Debug, Clone, PartialEq)]
pub struct DetourTrace {
    pub events: Vec<DetourEvent>,
    /// Whether the unrestricted greedy run reaches the destination.
    pub reached: bool,
    /// Strand node per budget; `None` when that run finishes the route.
    pub strand_node_per_m: Vec<Option<NodeId>>,
    /// SOC needed to finish the remaining route from each strand node
    /// (not reduced by any battery left at the strand point).
    pub soc_rest_per_m: Vec<f64>,
    /// Prefix sums of `extra_soc`; entry 0 is 0.
    pub soc_detour_prefix: Vec<f64>,
}

impl DetourTrace {
    /// Number of detours the unrestricted greedy run takes.
    pub fn n(&self) -> usize {
        self.events.len()
    }
}

/// Best feasible detour from `u` (holding `soc`) that rejoins the route at
/// `v`: the station minimizing d(u,s) + d(s,v), ties to the lowest id.
///
/// Feasible means the PEV can reach s with its current SOC and can reach v
/// from s on a full charge. Returns the station and the detour distance
/// d(u,s) + d(s,v), or `None` when no station is feasible.
pub fn best_detour(
    net: &Network,
    deployment: &Deployment,
    u: NodeId,
    v: NodeId,
    soc: f64,
    capacity: f64,
    params: &EvalParams,
) -> Option<(NodeId, f64)> {
    let table = net.distances();
    let mut best: Option<(NodeId, f64)> = None;
    for &s in deployment.stations() {
        let to_station = table.get(u, s);
        let back_to_route = table.get(s, v);
        if params.rate * to_station > soc || params.rate * back_to_route > capacity {
            continue;
        }
        let quantity = to_station + back_to_route;
        match best {
            Some((_, q)) if q <= quantity => {}
            _ => best = Some((s, quantity)),
        }
    }
    best
}

/// Greedy forward simulation of one trip under a deployment.
///
/// Every original route node is still visited; a detour replaces one leg
/// u -> v with u -> s -> v and ends with a full battery minus the s -> v
/// consumption. Stranding is a result, not an error.
pub fn simulate_trip(
    net: &Network,
    trip: &Trip,
    deployment: &Deployment,
    params: &EvalParams,
) -> DetourTrace {
    let route = &trip.route;
    let legs: Vec<f64> = route
        .windows(2)
        .map(|p| net.edge_length(p[0], p[1]).expect("route nodes must be adjacent"))
        .collect();
    // remaining[i] = route distance from route[i] to the destination
    let mut remaining = vec![0.0; route.len()];
    for i in (0..legs.len()).rev() {
        remaining[i] = legs[i] + remaining[i + 1];
    }

    let table = net.distances();
    let mut soc = trip.soc_ini;
    let mut events = Vec::new();
    let mut strand_node_per_m = Vec::new();
    let mut soc_rest_per_m = Vec::new();
    let mut soc_detour_prefix = vec![0.0];

    for i in 0..legs.len() {
        let (u, v) = (route[i], route[i + 1]);
        let leg_cost = params.rate * legs[i];
        if soc >= leg_cost {
            soc -= leg_cost;
            continue;
        }
        // Forced-detour point: a run whose budget is already spent strands here.
        strand_node_per_m.push(Some(u));
        soc_rest_per_m.push(params.rate * remaining[i]);

        let Some((station, quantity)) =
            best_detour(net, deployment, u, v, soc, trip.capacity, params)
        else {
            return DetourTrace {
                events,
                reached: false,
                strand_node_per_m,
                soc_rest_per_m,
                soc_detour_prefix,
            };
        };
        // Hand-written routes can make a leg longer than the detour; the
        // excess is never negative by definition.
        let extra_soc = (params.rate * quantity - leg_cost).max(0.0);
        soc_detour_prefix
            .push(soc_detour_prefix.last().expect("nonempty prefix") + extra_soc);
        events.push(DetourEvent { at_node: u, station, next_node: v, extra_soc });
        soc = trip.capacity - params.rate * table.get(station, v);
    }

    strand_node_per_m.push(None);
    soc_rest_per_m.push(0.0);
    DetourTrace { events, reached: true, strand_node_per_m, soc_rest_per_m, soc_detour_prefix }
}

/// Unsatisfied SOC E_m of the budget-m run.
///
/// A stranded run pays alpha times its detour energy plus beta times the
/// energy of the unfinished route; the full run, if it reaches the
/// destination, pays its detour energy unweighted. E_0 has zero detour
/// energy by construction.
pub fn unsatisfied_soc(trace: &DetourTrace, m: usize, params: &EvalParams) -> Result<f64, EvalError> {
    let n = trace.n();
    if m > n {
        return Err(EvalError::IndexOutOfRange { m, n });
    }
    if m == n && trace.reached {
        return Ok(trace.soc_detour_prefix[n]);
    }
    Ok(params.alpha * trace.soc_detour_prefix[m] + params.beta * trace.soc_rest_per_m[m])
}

/// Trip result: the trace, the minimal E_m, and which budget attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct TripEvaluation {
    pub trace: DetourTrace,
    pub score: f64,
    /// Budget attaining the score; `None` when the trip needs no detour.
    pub chosen_m: Option<usize>,
}

/// Simulates a trip and minimizes E_m over all budgets m in 0..=n.
/// Ties go to the smallest m.
pub fn evaluate_trip(
    net: &Network,
    trip: &Trip,
    deployment: &Deployment,
    params: &EvalParams,
) -> TripEvaluation {
    let trace = simulate_trip(net, trip, deployment, params);
    if trace.events.is_empty() && trace.reached {
        // No charging demand at all: the trip is fully satisfied.
        return TripEvaluation { trace, score: 0.0, chosen_m: None };
    }
    let mut best = f64::INFINITY;
    let mut chosen_m = 0;
    for m in 0..=trace.n() {
        let e = unsatisfied_soc(&trace, m, params).expect("m <= n");
        if e < best {
            best = e;
            chosen_m = m;
        }
    }
    TripEvaluation { trace, score: best, chosen_m: Some(chosen_m) }
}

/// Minimal unsatisfied SOC of one trip under a deployment; 0 when the trip
/// never needs to charge.
pub fn trip_score(net: &Network, trip: &Trip, deployment: &Deployment, params: &EvalParams) -> f64 {
    evaluate_trip(net, trip, deployment, params).score
}

/// Total unsatisfied SOC U over a trip set, summed in trip-index order so
/// the float result is bit-reproducible.
///
/// Kept sequential: callers that score many deployments (GA, brute force)
/// parallelize across deployments instead.
pub fn deployment_score(
    net: &Network,
    trips: &[Trip],
    deployment: &Deployment,
    params: &EvalParams,
) -> f64 {
    trips.iter().map(|t| trip_score(net, t, deployment, params)).sum()
}

/// Fit value 1 / (1 + U): strictly decreasing in U, 1 exactly when U = 0.
pub fn fitness(u: f64) -> f64 {
    1.0 / (1.0 + u)
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

/// Per-deployment report written by the CLI; node ids are 1-based.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub stations: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub rate: f64,
    pub total_unsatisfied_soc: f64,
    pub fit_value: f64,
    pub trips: Vec<TripReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TripReport {
    pub origin: usize,
    pub destination: usize,
    pub score: f64,
    pub chosen_m: Option<usize>,
    pub reached: bool,
    pub strand_node: Option<usize>,
    pub events: Vec<EventReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventReport {
    pub at_node: usize,
    pub station: usize,
    pub next_node: usize,
    pub extra_soc: f64,
}

impl EvaluationReport {
    /// Evaluates every trip (in parallel, reduced in trip-index order) and
    /// assembles the report.
    pub fn build(
        net: &Network,
        trips: &[Trip],
        deployment: &Deployment,
        params: &EvalParams,
    ) -> Self {
        let evals: Vec<TripEvaluation> = trips
            .par_iter()
            .map(|t| evaluate_trip(net, t, deployment, params))
            .collect();
        let total: f64 = evals.iter().map(|e| e.score).sum();
        let trip_reports = trips
            .iter()
            .zip(&evals)
            .map(|(trip, eval)| TripReport {
                origin: trip.origin + 1,
                destination: trip.destination + 1,
                score: eval.score,
                chosen_m: eval.chosen_m,
                reached: eval.trace.reached,
                strand_node: eval.trace.strand_node_per_m[eval.trace.n()].map(|n| n + 1),
                events: eval
                    .trace
                    .events
                    .iter()
                    .map(|e| EventReport {
                        at_node: e.at_node + 1,
                        station: e.station + 1,
                        next_node: e.next_node + 1,
                        extra_soc: e.extra_soc,
                    })
                    .collect(),
            })
            .collect();
        EvaluationReport {
            stations: deployment.file_ids(),
            alpha: params.alpha,
            beta: params.beta,
            rate: params.rate,
            total_unsatisfied_soc: total,
            fit_value: fitness(total),
            trips: trip_reports,
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_json_string())
    }
}
