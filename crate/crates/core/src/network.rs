//! Road-network graph: construction, incidence-matrix ingestion, shortest
//! paths, and the all-pairs distance table shared by trip evaluation.
//!
//! Node ids are 0-based in memory and 1-based in every file format.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node inside a [`Network`], 0-based and contiguous.
pub type NodeId = usize;

/// Land-use class of a node, used to cluster trip origins and destinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Area {
    Residential,
    Commercial,
    Other,
}

impl Area {
    /// All areas in canonical order (the order used for weighted OD sampling).
    pub const ALL: [Area; 3] = [Area::Residential, Area::Commercial, Area::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Area::Residential => "residential",
            Area::Commercial => "commercial",
            Area::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub area: Area,
    /// Layout position, used only for export.
    pub coord: Option<(f64, f64)>,
}

impl Node {
    pub fn new(id: NodeId, area: Area) -> Self {
        Node { id, area, coord: None }
    }
}

/// Undirected road segment. Endpoints are stored with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId, length: f64) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Edge { a, b, length }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node ids must be contiguous from the first id")]
    NonContiguousIds,
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge between nodes {a} and {b} has non-positive length {length}")]
    NonPositiveLength { a: NodeId, b: NodeId, length: f64 },
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("incidence column {column} has {ones} ones, expected exactly 2")]
    MalformedColumn { column: usize, ones: usize },
    #[error("incidence matrix has {columns} roads but {lengths} lengths were given")]
    LengthCountMismatch { columns: usize, lengths: usize },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of a shortest-path query: total distance plus the node route.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub distance: f64,
    pub route: Vec<NodeId>,
}

/// Symmetric all-pairs shortest-path distances, indexed by node id.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    n: usize,
    data: Vec<f64>,
}

impl DistanceTable {
    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

/// Connected undirected road graph with per-node area labels.
///
/// Immutable after construction; the all-pairs distance table is computed
/// once on first use and shared read-only, so a `Network` can be queried
/// from any number of threads.
#[derive(Debug)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, f64)>>,
    distances: OnceLock<DistanceTable>,
}

impl Network {
    /// Builds and validates a network from explicit nodes and edges.
    ///
    /// Node ids must be unique and contiguous from 0. Edges must have
    /// positive length, no self-loops, at most one edge per node pair, and
    /// the resulting graph must be connected.
    pub fn new(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        nodes.sort_by_key(|n| n.id);
        for (i, node) in nodes.iter().enumerate() {
            match node.id.cmp(&i) {
                Ordering::Less => return Err(NetworkError::DuplicateNode(node.id)),
                Ordering::Greater => return Err(NetworkError::NonContiguousIds),
                Ordering::Equal => {}
            }
        }
        let n = nodes.len();

        let mut seen = BTreeSet::new();
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| Edge::new(e.a, e.b, e.length))
            .collect();
        for e in &edges {
            if e.a >= n || e.b >= n {
                return Err(NetworkError::UnknownNode(e.a.max(e.b)));
            }
            if e.a == e.b {
                return Err(NetworkError::SelfLoop(e.a));
            }
            if e.length <= 0.0 || e.length.is_nan() {
                return Err(NetworkError::NonPositiveLength { a: e.a, b: e.b, length: e.length });
            }
            if !seen.insert((e.a, e.b)) {
                return Err(NetworkError::DuplicateEdge(e.a, e.b));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.a].push((e.b, e.length));
            adjacency[e.b].push((e.a, e.length));
        }
        for list in &mut adjacency {
            list.sort_by_key(|x| x.0);
        }

        let net = Network { nodes, edges, adjacency, distances: OnceLock::new() };
        if !net.is_connected() {
            return Err(NetworkError::DisconnectedGraph);
        }
        Ok(net)
    }

    /// Builds a network from a 0/1 node-by-road incidence matrix and the
    /// per-road lengths aligned with its columns.
    ///
    /// Every column must contain exactly two ones. Nodes get area `other`;
    /// relabel through the JSON format when areas matter.
    pub fn from_incidence(matrix: &[Vec<u8>], lengths: &[f64]) -> Result<Self, NetworkError> {
        if matrix.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        let columns = matrix[0].len();
        for row in matrix {
            if row.len() != columns {
                return Err(NetworkError::Parse(format!(
                    "incidence rows have inconsistent widths ({} vs {})",
                    columns,
                    row.len()
                )));
            }
        }
        if lengths.len() != columns {
            return Err(NetworkError::LengthCountMismatch { columns, lengths: lengths.len() });
        }

        let mut edges = Vec::with_capacity(columns);
        for col in 0..columns {
            let endpoints: Vec<NodeId> = (0..matrix.len())
                .filter(|&row| matrix[row][col] != 0)
                .collect();
            if endpoints.len() != 2 {
                return Err(NetworkError::MalformedColumn { column: col, ones: endpoints.len() });
            }
            edges.push(Edge::new(endpoints[0], endpoints[1], lengths[col]));
        }
        let nodes = (0..matrix.len()).map(|id| Node::new(id, Area::Other)).collect();
        Network::new(nodes, edges)
    }

    /// Derived node-by-road incidence matrix plus per-road lengths, columns
    /// in stored edge order. Round-trips through [`Network::from_incidence`].
    pub fn to_incidence(&self) -> (Vec<Vec<u8>>, Vec<f64>) {
        let mut matrix = vec![vec![0u8; self.edges.len()]; self.nodes.len()];
        let mut lengths = Vec::with_capacity(self.edges.len());
        for (col, e) in self.edges.iter().enumerate() {
            matrix[e.a][col] = 1;
            matrix[e.b][col] = 1;
            lengths.push(e.length);
        }
        (matrix, lengths)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id < self.nodes.len()
    }

    /// Ids of all nodes labelled with `area`, ascending.
    pub fn area_nodes(&self, area: Area) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.area == area).map(|n| n.id).collect()
    }

    /// Length of the edge between `u` and `v`, if one exists.
    pub fn edge_length(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.adjacency[u]
            .binary_search_by(|probe| probe.0.cmp(&v))
            .ok()
            .map(|i| self.adjacency[u][i].1)
    }

    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[u]
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Single-source Dijkstra. Returns per-node distance and predecessor;
    /// among equal-distance predecessors the lowest node id wins, so routes
    /// are reproducible.
    fn dijkstra(&self, source: NodeId) -> (Vec<f64>, Vec<Option<NodeId>>) {
        #[derive(PartialEq)]
        struct Entry {
            dist: f64,
            node: NodeId,
        }
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                // min-heap on distance, then node id
                other
                    .dist
                    .partial_cmp(&self.dist)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| other.node.cmp(&self.node))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<NodeId>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry { dist: 0.0, node: source });

        while let Some(Entry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let candidate = d + w;
                if candidate < dist[v] {
                    dist[v] = candidate;
                    pred[v] = Some(u);
                    heap.push(Entry { dist: candidate, node: v });
                } else if candidate == dist[v] && pred[v].is_some_and(|p| u < p) {
                    pred[v] = Some(u);
                }
            }
        }
        (dist, pred)
    }

    /// Shortest path from `u` to `v` under edge lengths.
    ///
    /// Ties are broken deterministically: among equal-distance predecessors
    /// the lowest node id is kept. Panics if either id is out of range.
    pub fn shortest_path(&self, u: NodeId, v: NodeId) -> PathResult {
        assert!(self.contains_node(u) && self.contains_node(v), "node id out of range");
        let (dist, pred) = self.dijkstra(u);
        let mut route = vec![v];
        let mut cur = v;
        while cur != u {
            cur = pred[cur].expect("connected network must reach every node");
            route.push(cur);
        }
        route.reverse();
        PathResult { distance: dist[v], route }
    }

    /// All-pairs shortest-path distances, computed once and cached.
    ///
    /// Each entry is the Dijkstra distance from the lower-id endpoint, and
    /// the table is mirrored so symmetry holds bit-exactly.
    pub fn distances(&self) -> &DistanceTable {
        self.distances.get_or_init(|| {
            let n = self.nodes.len();
            let mut data = vec![0.0; n * n];
            for u in 0..n {
                let (dist, _) = self.dijkstra(u);
                for v in u..n {
                    data[u * n + v] = dist[v];
                    data[v * n + u] = dist[v];
                }
            }
            DistanceTable { n, data }
        })
    }

    /// Graphviz DOT rendering with `area` and `station` node attributes.
    /// Ids are 1-based to match the file formats.
    pub fn to_dot(&self, stations: &BTreeSet<NodeId>) -> String {
        let mut out = String::from("graph network {\n");
        for node in &self.nodes {
            let _ = writeln!(
                out,
                "  {} [area=\"{}\", station={}];",
                node.id + 1,
                node.area.as_str(),
                stations.contains(&node.id)
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  {} -- {} [len={}];", e.a + 1, e.b + 1, e.length);
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeFile>,
    edges: Vec<EdgeFile>,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    id: usize,
    area: Area,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    a: usize,
    b: usize,
    length: f64,
}

fn file_id(id: usize) -> Result<NodeId, NetworkError> {
    id.checked_sub(1).ok_or(NetworkError::UnknownNode(0))
}

impl Network {
    /// Loads a network from its JSON file format (1-based node ids).
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        let file: NetworkFile =
            serde_json::from_str(&text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        let nodes = file
            .nodes
            .into_iter()
            .map(|n| {
                Ok(Node {
                    id: file_id(n.id)?,
                    area: n.area,
                    coord: match (n.x, n.y) {
                        (Some(x), Some(y)) => Some((x, y)),
                        _ => None,
                    },
                })
            })
            .collect::<Result<Vec<_>, NetworkError>>()?;
        let edges = file
            .edges
            .into_iter()
            .map(|e| Ok(Edge::new(file_id(e.a)?, file_id(e.b)?, e.length)))
            .collect::<Result<Vec<_>, NetworkError>>()?;
        Network::new(nodes, edges)
    }

    /// Serializes to the JSON file format (1-based node ids).
    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeFile {
                    id: n.id + 1,
                    area: n.area,
                    x: n.coord.map(|c| c.0),
                    y: n.coord.map(|c| c.1),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeFile { a: e.a + 1, b: e.b + 1, length: e.length })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("network serialization");
        s.push('\n');
        s
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// Loads a network from an incidence CSV (header of road ids, one 0/1
    /// row per node) plus a companion lengths CSV with `road,length` rows.
    pub fn load_incidence_csv(
        matrix_path: impl AsRef<Path>,
        lengths_path: impl AsRef<Path>,
    ) -> Result<Self, NetworkError> {
        let mut reader = csv::Reader::from_path(matrix_path.as_ref())
            .map_err(|e| NetworkError::Parse(e.to_string()))?;
        let roads: Vec<String> =
            reader.headers().map_err(|e| NetworkError::Parse(e.to_string()))?
                .iter()
                .map(str::to_owned)
                .collect();
        let mut matrix = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| NetworkError::Parse(e.to_string()))?;
            let row = record
                .iter()
                .map(|cell| match cell.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(NetworkError::Parse(format!(
                        "incidence cell must be 0 or 1, got {other:?}"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            matrix.push(row);
        }

        let mut lengths_by_road = std::collections::HashMap::new();
        let mut reader = csv::Reader::from_path(lengths_path.as_ref())
            .map_err(|e| NetworkError::Parse(e.to_string()))?;
        for record in reader.records() {
            let record = record.map_err(|e| NetworkError::Parse(e.to_string()))?;
            if record.len() != 2 {
                return Err(NetworkError::Parse("lengths rows must be road,length".into()));
            }
            let road = record[0].trim().to_owned();
            let length: f64 = record[1]
                .trim()
                .parse()
                .map_err(|e| NetworkError::Parse(format!("bad length for road {road}: {e}")))?;
            lengths_by_road.insert(road, length);
        }
        if lengths_by_road.len() != roads.len() {
            return Err(NetworkError::LengthCountMismatch {
                columns: roads.len(),
                lengths: lengths_by_road.len(),
            });
        }
        let lengths = roads
            .iter()
            .map(|road| {
                lengths_by_road
                    .get(road)
                    .copied()
                    .ok_or_else(|| NetworkError::Parse(format!("no length for road {road}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Network::from_incidence(&matrix, &lengths)
    }

    /// Writes the incidence CSV pair described in [`Network::load_incidence_csv`],
    /// numbering roads 1..=E in stored edge order.
    pub fn save_incidence_csv(
        &self,
        matrix_path: impl AsRef<Path>,
        lengths_path: impl AsRef<Path>,
    ) -> Result<(), NetworkError> {
        let (matrix, lengths) = self.to_incidence();
        let mut out = String::new();
        let header: Vec<String> = (1..=lengths.len()).map(|r| r.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &matrix {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        std::fs::write(matrix_path, out)?;

        let mut out = String::from("road,length\n");
        for (i, len) in lengths.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, len);
        }
        std::fs::write(lengths_path, out)?;
        Ok(())
    }
}
