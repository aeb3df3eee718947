//! OD trip demand: seeded generation between area clusters and trip file IO.
//!
//! SOC values are measured in distance-equivalent units: driving one length
//! unit at consumption rate 1 costs one SOC unit. Generation applies rate 1
//! when raising the initial SOC to the first-leg cost.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Area, Network, NodeId};

/// One OD journey: a fixed node route plus the PEV's battery state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Node route origin..=destination; consecutive nodes share an edge.
    pub route: Vec<NodeId>,
    pub soc_ini: f64,
    /// Full-charge battery capacity C.
    pub capacity: f64,
}

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("area {} has no nodes but carries a nonzero weight", .0.as_str())]
    EmptyAreaClass(Area),
    #[error("area {} needs at least two nodes for same-area trips", .0.as_str())]
    AreaTooSmall(Area),
    #[error("invalid demand config: {0}")]
    InvalidConfig(String),
    #[error("trips schema error: {0}")]
    Schema(String),
    #[error("route nodes {0} and {1} are not adjacent")]
    RouteNotConnected(usize, usize),
    #[error("soc_ini {soc_ini} outside (0, capacity={capacity}]")]
    SocOutOfRange { soc_ini: f64, capacity: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Trip {
    /// Checks the trip against a network: known ids, connected route with
    /// matching endpoints, and 0 < soc_ini <= capacity.
    ///
    /// Error messages report node ids 1-based, as in the file formats.
    pub fn validate(&self, net: &Network) -> Result<(), DemandError> {
        if self.route.is_empty() {
            return Err(DemandError::Schema("route must not be empty".into()));
        }
        for &node in &self.route {
            if !net.contains_node(node) {
                return Err(DemandError::Schema(format!("route node {} not in network", node + 1)));
            }
        }
        if self.route[0] != self.origin {
            return Err(DemandError::Schema(format!(
                "route starts at {} but origin is {}",
                self.route[0] + 1,
                self.origin + 1
            )));
        }
        if *self.route.last().expect("nonempty") != self.destination {
            return Err(DemandError::Schema(format!(
                "route ends at {} but destination is {}",
                self.route.last().expect("nonempty") + 1,
                self.destination + 1
            )));
        }
        for pair in self.route.windows(2) {
            if net.edge_length(pair[0], pair[1]).is_none() {
                return Err(DemandError::RouteNotConnected(pair[0] + 1, pair[1] + 1));
            }
        }
        if !(self.soc_ini > 0.0 && self.soc_ini <= self.capacity) {
            return Err(DemandError::SocOutOfRange {
                soc_ini: self.soc_ini,
                capacity: self.capacity,
            });
        }
        Ok(())
    }

    /// Total route length (distance units).
    pub fn route_distance(&self, net: &Network) -> f64 {
        self.route
            .windows(2)
            .map(|p| net.edge_length(p[0], p[1]).expect("route validated"))
            .sum()
    }
}

/// Parameters of the seeded trip generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandConfig {
    pub trip_count: usize,
    /// Weight per ordered (origin area, destination area) pair; missing
    /// pairs weigh 0.
    pub pair_weights: BTreeMap<(Area, Area), f64>,
    /// Initial-SOC range as fractions of capacity, 0 < lo <= hi <= 1.
    pub soc_ini_range: (f64, f64),
    pub capacity: f64,
    pub seed: u64,
}

impl DemandConfig {
    pub fn validate(&self) -> Result<(), DemandError> {
        let mut total = 0.0;
        for (&(a, b), &w) in &self.pair_weights {
            if w < 0.0 || w.is_nan() {
                return Err(DemandError::InvalidConfig(format!(
                    "weight for {}->{} must be nonnegative, got {w}",
                    a.as_str(),
                    b.as_str()
                )));
            }
            total += w;
        }
        if total <= 0.0 || total.is_nan() {
            return Err(DemandError::InvalidConfig("pair weights must not be all zero".into()));
        }
        let (lo, hi) = self.soc_ini_range;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(DemandError::InvalidConfig(format!(
                "soc_ini_range must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        if self.capacity <= 0.0 || self.capacity.is_nan() {
            return Err(DemandError::InvalidConfig(format!(
                "capacity must be positive, got {}",
                self.capacity
            )));
        }
        Ok(())
    }

    /// All nine ordered area pairs in canonical order, used for sampling
    /// and for count summaries.
    pub fn canonical_pairs() -> [(Area, Area); 9] {
        let mut pairs = [(Area::Residential, Area::Residential); 9];
        let mut i = 0;
        for a in Area::ALL {
            for b in Area::ALL {
                pairs[i] = (a, b);
                i += 1;
            }
        }
        pairs
    }
}

/// Draws `cfg.trip_count` trips on `net`, deterministically for a given
/// config.
///
/// Per trip the generator draws, in fixed order: the area pair (weighted),
/// the origin, the destination (redrawn until distinct from the origin),
/// and the raw initial SOC, uniform in [lo*C, hi*C]. The SOC is then raised
/// to the first-leg cost so a rational driver can depart, and capped at
/// capacity. Routes are shortest paths. Changing this draw order invalidates
/// golden trip files.
pub fn generate_trips(net: &Network, cfg: &DemandConfig) -> Result<Vec<Trip>, DemandError> {
    cfg.validate()?;
    let pairs = DemandConfig::canonical_pairs();
    let weights: Vec<f64> =
        pairs.iter().map(|p| cfg.pair_weights.get(p).copied().unwrap_or(0.0)).collect();

    let mut area_nodes: BTreeMap<Area, Vec<NodeId>> = BTreeMap::new();
    for area in Area::ALL {
        area_nodes.insert(area, net.area_nodes(area));
    }
    for (&(a, b), w) in pairs.iter().zip(&weights) {
        if *w <= 0.0 {
            continue;
        }
        for area in [a, b] {
            if area_nodes[&area].is_empty() {
                return Err(DemandError::EmptyAreaClass(area));
            }
        }
        if a == b && area_nodes[&a].len() < 2 {
            return Err(DemandError::AreaTooSmall(a));
        }
    }

    let sampler = WeightedIndex::new(&weights).expect("validated weights");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.soc_ini_range;
    let (lo_abs, hi_abs) = (lo * cfg.capacity, hi * cfg.capacity);

    let mut trips = Vec::with_capacity(cfg.trip_count);
    for _ in 0..cfg.trip_count {
        let (a, b) = pairs[sampler.sample(&mut rng)];
        let origins = &area_nodes[&a];
        let dests = &area_nodes[&b];
        let origin = origins[rng.gen_range(0..origins.len())];
        let destination = loop {
            let d = dests[rng.gen_range(0..dests.len())];
            if d != origin {
                break d;
            }
        };
        let route = net.shortest_path(origin, destination).route;
        let first_leg = net.edge_length(route[0], route[1]).expect("adjacent route nodes");
        let raw: f64 = rng.gen_range(lo_abs..=hi_abs);
        let soc_ini = raw.max(first_leg).min(cfg.capacity);
        trips.push(Trip { origin, destination, route, soc_ini, capacity: cfg.capacity });
    }
    Ok(trips)
}

/// Counts trips per ordered (origin area, destination area) pair.
pub fn pair_counts(net: &Network, trips: &[Trip]) -> BTreeMap<(Area, Area), usize> {
    let mut counts: BTreeMap<(Area, Area), usize> = BTreeMap::new();
    for pair in DemandConfig::canonical_pairs() {
        counts.insert(pair, 0);
    }
    for trip in trips {
        let key = (net.nodes()[trip.origin].area, net.nodes()[trip.destination].area);
        *counts.get_mut(&key).expect("all pairs present") += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TripFile {
    origin: usize,
    destination: usize,
    route: Vec<usize>,
    soc_ini: f64,
    capacity: f64,
}

impl From<&Trip> for TripFile {
    fn from(t: &Trip) -> Self {
        TripFile {
            origin: t.origin + 1,
            destination: t.destination + 1,
            route: t.route.iter().map(|&n| n + 1).collect(),
            soc_ini: t.soc_ini,
            capacity: t.capacity,
        }
    }
}

fn trip_from_file(t: TripFile, net: &Network) -> Result<Trip, DemandError> {
    let to_internal = |id: usize| -> Result<NodeId, DemandError> {
        id.checked_sub(1)
            .filter(|&n| net.contains_node(n))
            .ok_or_else(|| DemandError::Schema(format!("node id {id} not in network")))
    };
    let trip = Trip {
        origin: to_internal(t.origin)?,
        destination: to_internal(t.destination)?,
        route: t.route.into_iter().map(to_internal).collect::<Result<_, _>>()?,
        soc_ini: t.soc_ini,
        capacity: t.capacity,
    };
    trip.validate(net)?;
    Ok(trip)
}

/// Serializes trips to the JSON array format (1-based node ids).
pub fn trips_json_string(trips: &[Trip]) -> String {
    let files: Vec<TripFile> = trips.iter().map(TripFile::from).collect();
    let mut s = serde_json::to_string_pretty(&files).expect("trip serialization");
    s.push('\n');
    s
}

pub fn save_trips(trips: &[Trip], path: impl AsRef<Path>) -> Result<(), DemandError> {
    std::fs::write(path, trips_json_string(trips))?;
    Ok(())
}

/// Parses and validates a trips JSON file against `net`.
pub fn parse_trips(path: impl AsRef<Path>, net: &Network) -> Result<Vec<Trip>, DemandError> {
    let text = std::fs::read_to_string(path)?;
    let files: Vec<TripFile> =
        serde_json::from_str(&text).map_err(|e| DemandError::Schema(e.to_string()))?;
    files.into_iter().map(|t| trip_from_file(t, net)).collect()
}

/// Writes the CSV variant: origin, destination, `-`-joined route, soc_ini,
/// capacity.
pub fn save_trips_csv(trips: &[Trip], path: impl AsRef<Path>) -> Result<(), DemandError> {
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_error)?;
    writer
        .write_record(["origin", "destination", "route", "soc_ini", "capacity"])
        .map_err(csv_error)?;
    for trip in trips {
        let route = trip
            .route
            .iter()
            .map(|&n| (n + 1).to_string())
            .collect::<Vec<_>>()
            .join("-");
        writer
            .write_record([
                (trip.origin + 1).to_string(),
                (trip.destination + 1).to_string(),
                route,
                trip.soc_ini.to_string(),
                trip.capacity.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses the CSV variant written by [`save_trips_csv`].
pub fn parse_trips_csv(path: impl AsRef<Path>, net: &Network) -> Result<Vec<Trip>, DemandError> {
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(csv_error)?;
    let mut trips = Vec::new();
    for record in reader.deserialize() {
        let record: CsvTripRow = record.map_err(csv_error)?;
        let route = record
            .route
            .split('-')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| DemandError::Schema(format!("bad route id {part:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let file = TripFile {
            origin: record.origin,
            destination: record.destination,
            route,
            soc_ini: record.soc_ini,
            capacity: record.capacity,
        };
        trips.push(trip_from_file(file, net)?);
    }
    Ok(trips)
}

#[derive(Deserialize)]
struct CsvTripRow {
    origin: usize,
    destination: usize,
    route: String,
    soc_ini: f64,
    capacity: f64,
}

fn csv_error(e: csv::Error) -> DemandError {
    DemandError::Schema(e.to_string())
}

#[derive(Serialize, Deserialize)]
struct DemandConfigFile {
    trip_count: usize,
    /// Keys are `origin_area->destination_area`, e.g. `residential->commercial`.
    pair_weights: BTreeMap<String, f64>,
    soc_ini_range: [f64; 2],
    capacity: f64,
    seed: u64,
}

fn parse_area(s: &str) -> Result<Area, DemandError> {
    match s {
        "residential" => Ok(Area::Residential),
        "commercial" => Ok(Area::Commercial),
        "other" => Ok(Area::Other),
        _ => Err(DemandError::Schema(format!("unknown area {s:?}"))),
    }
}

impl DemandConfig {
    /// Loads the config JSON format (`pair_weights` keyed by
    /// `area->area` strings) and validates it.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, DemandError> {
        let text = std::fs::read_to_string(path)?;
        let file: DemandConfigFile =
            serde_json::from_str(&text).map_err(|e| DemandError::Schema(e.to_string()))?;
        let mut pair_weights = BTreeMap::new();
        for (key, weight) in file.pair_weights {
            let (from, to) = key
                .split_once("->")
                .ok_or_else(|| DemandError::Schema(format!("bad pair key {key:?}")))?;
            pair_weights.insert((parse_area(from.trim())?, parse_area(to.trim())?), weight);
        }
        let cfg = DemandConfig {
            trip_count: file.trip_count,
            pair_weights,
            soc_ini_range: (file.soc_ini_range[0], file.soc_ini_range[1]),
            capacity: file.capacity,
            seed: file.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        let file = DemandConfigFile {
            trip_count: self.trip_count,
            pair_weights: self
                .pair_weights
                .iter()
                .map(|(&(a, b), &w)| (format!("{}->{}", a.as_str(), b.as_str()), w))
                .collect(),
            soc_ini_range: [self.soc_ini_range.0, self.soc_ini_range.1],
            capacity: self.capacity,
            seed: self.seed,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("config serialization");
        s.push('\n');
        s
    }
}
