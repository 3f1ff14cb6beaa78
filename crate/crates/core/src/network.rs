//! Road graph storage and time-dependent fastest-path routing.
//!
//! Edge travel times vary by hour of day; a query resolves the whole path
//! with the snapshot of its departure hour. Ties between equal-time paths
//! go to the lexicographically smallest node-index sequence, so repeated
//! runs return identical routes and route distances.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::csvio;

/// Hourly snapshots per day.
pub const HOURS: usize = 24;

/// Node handle; the index follows load order of the node file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Zone handle; the index follows sorted zone-name order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(pub u32);

impl ZoneId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z#{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("network validation: {0}")]
    Validation(String),
    #[error("no path from {from} to {to}")]
    NoPath { from: String, to: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge description used to build a network in memory.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub travel_time_s: [f64; HOURS],
}

impl EdgeSpec {
    /// Edge with the same travel time in every hour.
    pub fn constant(from: &str, to: &str, length_m: f64, tt_s: f64) -> EdgeSpec {
        EdgeSpec {
            from: from.to_string(),
            to: to.to_string(),
            length_m,
            travel_time_s: [tt_s; HOURS],
        }
    }
}

#[derive(Debug, Clone)]
struct Edge {
    to: u32,
    length_m: f64,
    tt_s: [f64; HOURS],
}

/// Travel times and route distances from one origin to every node, for one
/// departure-hour snapshot. Unreachable nodes hold `f64::INFINITY`.
#[derive(Debug)]
pub struct OneToAll {
    pub time_s: Vec<f64>,
    pub dist_m: Vec<f64>,
}

/// Fastest route between two nodes for one departure-hour snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub node_sequence: Vec<NodeId>,
    pub travel_time_s: f64,
    pub distance_m: f64,
    pub depart_time_s: f64,
}

/// Immutable road network. Queries are read-only and safe to share across
/// threads; one-to-all results are cached per (origin, hour).
#[derive(Debug)]
pub struct Network {
    names: Vec<String>,
    name_index: HashMap<String, u32>,
    out: Vec<Vec<Edge>>,
    zone_of_node: Vec<ZoneId>,
    zone_names: Vec<String>,
    zone_nodes: Vec<Vec<NodeId>>,
    depots: BTreeSet<NodeId>,
    cache: RwLock<HashMap<(u32, u8), Arc<OneToAll>>>,
}

/// Hour-of-day snapshot index for a departure time in seconds; times past
/// midnight wrap into the next day.
pub fn hour_of(depart_s: f64) -> usize {
    (((depart_s / 3600.0).floor() as i64).rem_euclid(HOURS as i64)) as usize
}

impl Network {
    /// Builds and validates a network from parsed parts. `zones` maps node
    /// name to zone name and must cover every node exactly once.
    pub fn new(
        nodes: Vec<String>,
        edges: Vec<EdgeSpec>,
        zones: Vec<(String, String)>,
        depots: Vec<String>,
    ) -> Result<Network, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Validation("no nodes".into()));
        }
        let mut name_index = HashMap::new();
        for (i, name) in nodes.iter().enumerate() {
            if name_index.insert(name.clone(), i as u32).is_some() {
                return Err(NetworkError::Validation(format!("duplicate node `{name}`")));
            }
        }
        let n = nodes.len();

        let mut out: Vec<Vec<Edge>> = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for e in &edges {
            let from = *name_index.get(&e.from).ok_or_else(|| {
                NetworkError::Validation(format!("edge references unknown node `{}`", e.from))
            })?;
            let to = *name_index.get(&e.to).ok_or_else(|| {
                NetworkError::Validation(format!("edge references unknown node `{}`", e.to))
            })?;
            if from == to {
                return Err(NetworkError::Validation(format!(
                    "self-loop edge at `{}`",
                    e.from
                )));
            }
            if !seen.insert((from, to)) {
                return Err(NetworkError::Validation(format!(
                    "duplicate edge `{}` -> `{}`",
                    e.from, e.to
                )));
            }
            if !(e.length_m > 0.0) || !e.length_m.is_finite() {
                return Err(NetworkError::Validation(format!(
                    "edge `{}` -> `{}` has non-positive length",
                    e.from, e.to
                )));
            }
            if e.travel_time_s.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                return Err(NetworkError::Validation(format!(
                    "edge `{}` -> `{}` has non-positive travel time",
                    e.from, e.to
                )));
            }
            out[from as usize].push(Edge {
                to,
                length_m: e.length_m,
                tt_s: e.travel_time_s,
            });
        }
        for adj in &mut out {
            adj.sort_by_key(|e| e.to);
        }

        let mut zone_name_of_node: Vec<Option<String>> = vec![None; n];
        for (node, zone) in &zones {
            let id = *name_index.get(node).ok_or_else(|| {
                NetworkError::Validation(format!("zone entry references unknown node `{node}`"))
            })?;
            if zone_name_of_node[id as usize].is_some() {
                return Err(NetworkError::Validation(format!(
                    "node `{node}` assigned to more than one zone"
                )));
            }
            zone_name_of_node[id as usize] = Some(zone.clone());
        }
        if let Some(i) = zone_name_of_node.iter().position(|z| z.is_none()) {
            return Err(NetworkError::Validation(format!(
                "node `{}` has no zone",
                nodes[i]
            )));
        }
        let mut zone_names: Vec<String> = zone_name_of_node
            .iter()
            .map(|z| z.clone().unwrap())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        zone_names.sort();
        let zone_index: HashMap<&String, u32> = zone_names
            .iter()
            .enumerate()
            .map(|(i, z)| (z, i as u32))
            .collect();
        let mut zone_of_node = Vec::with_capacity(n);
        let mut zone_nodes: Vec<Vec<NodeId>> = vec![Vec::new(); zone_names.len()];
        for (i, z) in zone_name_of_node.iter().enumerate() {
            let zid = zone_index[z.as_ref().unwrap()];
            zone_of_node.push(ZoneId(zid));
            zone_nodes[zid as usize].push(NodeId(i as u32));
        }

        let mut depot_set = BTreeSet::new();
        for d in &depots {
            let id = *name_index.get(d).ok_or_else(|| {
                NetworkError::Validation(format!("depot references unknown node `{d}`"))
            })?;
            depot_set.insert(NodeId(id));
        }

        let net = Network {
            names: nodes,
            name_index,
            out,
            zone_of_node,
            zone_names,
            zone_nodes,
            depots: depot_set,
            cache: RwLock::new(HashMap::new()),
        };
        net.check_strongly_connected()?;
        Ok(net)
    }

    fn check_strongly_connected(&self) -> Result<(), NetworkError> {
        let n = self.names.len();
        if n == 1 {
            return Ok(());
        }
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, adj) in self.out.iter().enumerate() {
            for e in adj {
                rev[e.to as usize].push(u as u32);
            }
        }
        let reach = |adj_of: &dyn Fn(usize) -> Vec<u32>| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![0u32];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                for v in adj_of(u as usize) {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        };
        let fwd = reach(&|u| self.out[u].iter().map(|e| e.to).collect());
        let bwd = reach(&|u| rev[u].clone());
        for i in 0..n {
            if !fwd[i] || !bwd[i] {
                return Err(NetworkError::Validation(format!(
                    "graph is not strongly connected: node `{}` unreachable",
                    self.names[i]
                )));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.names[id.idx()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).map(|&i| NodeId(i))
    }

    pub fn zone_count(&self) -> usize {
        self.zone_names.len()
    }

    pub fn zone_of(&self, node: NodeId) -> ZoneId {
        self.zone_of_node[node.idx()]
    }

    pub fn zone_name(&self, id: ZoneId) -> &str {
        &self.zone_names[id.idx()]
    }

    pub fn zone_id(&self, name: &str) -> Option<ZoneId> {
        self.zone_names
            .binary_search_by(|z| z.as_str().cmp(name))
            .ok()
            .map(|i| ZoneId(i as u32))
    }

    /// Nodes of a zone, ascending by node index.
    pub fn zone_nodes(&self, zone: ZoneId) -> &[NodeId] {
        &self.zone_nodes[zone.idx()]
    }

    pub fn depots(&self) -> &BTreeSet<NodeId> {
        &self.depots
    }

    /// Length and hourly travel times of the directed edge `from -> to`.
    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<(f64, &[f64; HOURS])> {
        let adj = &self.out[from.idx()];
        adj.binary_search_by_key(&to.0, |e| e.to)
            .ok()
            .map(|i| (adj[i].length_m, &adj[i].tt_s))
    }

    /// Travel time and route distance of the fastest path, without
    /// materialising the node sequence.
    pub fn query(
        &self,
        origin: NodeId,
        dest: NodeId,
        depart_s: f64,
    ) -> Result<(f64, f64), NetworkError> {
        let ota = self.one_to_all(origin, hour_of(depart_s));
        let t = ota.time_s[dest.idx()];
        if t.is_infinite() {
            return Err(self.no_path(origin, dest));
        }
        Ok((t, ota.dist_m[dest.idx()]))
    }

    /// Travel time and distance of the time-minimal path; the distance is
    /// measured along that path, not a shortest-distance path.
    pub fn direct_metrics(
        &self,
        origin: NodeId,
        dest: NodeId,
        depart_s: f64,
    ) -> Result<(f64, f64), NetworkError> {
        self.query(origin, dest, depart_s)
    }

    /// Full fastest route with its node sequence.
    pub fn fastest_path(
        &self,
        origin: NodeId,
        dest: NodeId,
        depart_s: f64,
    ) -> Result<Route, NetworkError> {
        let hour = hour_of(depart_s);
        let ota = self.one_to_all(origin, hour);
        if ota.time_s[dest.idx()].is_infinite() {
            return Err(self.no_path(origin, dest));
        }
        let nodes = self.lex_walk(&ota.time_s, origin, dest, hour);
        let mut dist = 0.0;
        for w in nodes.windows(2) {
            dist += self.edge_between(w[0], w[1]).unwrap().0;
        }
        debug_assert_eq!(dist, ota.dist_m[dest.idx()]);
        Ok(Route {
            node_sequence: nodes,
            travel_time_s: ota.time_s[dest.idx()],
            distance_m: ota.dist_m[dest.idx()],
            depart_time_s: depart_s,
        })
    }

    fn no_path(&self, origin: NodeId, dest: NodeId) -> NetworkError {
        NetworkError::NoPath {
            from: self.node_name(origin).to_string(),
            to: self.node_name(dest).to_string(),
        }
    }

    /// Cached one-to-all result for `(origin, hour)`.
    pub fn one_to_all(&self, origin: NodeId, hour: usize) -> Arc<OneToAll> {
        let key = (origin.0, hour as u8);
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return Arc::clone(hit);
        }
        let computed = Arc::new(self.compute_one_to_all(origin, hour));
        let mut guard = self.cache.write().unwrap();
        Arc::clone(guard.entry(key).or_insert(computed))
    }

    fn compute_one_to_all(&self, origin: NodeId, hour: usize) -> OneToAll {
        let time = self.dijkstra(origin, hour);
        let n = self.names.len();
        let mut dist = vec![f64::INFINITY; n];
        // Equal-time DAG: edge (u, v) lies on some fastest path iff
        // time[u] + tt == time[v] exactly (times are sums of the same adds).
        let mut dag_in: Vec<Vec<u32>> = vec![Vec::new(); n];
        for u in 0..n {
            if time[u].is_infinite() {
                continue;
            }
            for e in &self.out[u] {
                if time[u] + e.tt_s[hour] == time[e.to as usize] {
                    dag_in[e.to as usize].push(u as u32);
                }
            }
        }
        let mut reaches = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        for d in 0..n {
            if time[d].is_infinite() {
                continue;
            }
            if d == origin.idx() {
                dist[d] = 0.0;
                continue;
            }
            reaches.iter_mut().for_each(|r| *r = false);
            reaches[d] = true;
            stack.push(d as u32);
            while let Some(v) = stack.pop() {
                for &u in &dag_in[v as usize] {
                    if !reaches[u as usize] {
                        reaches[u as usize] = true;
                        stack.push(u);
                    }
                }
            }
            dist[d] = self.lex_walk_dist(&time, origin, d, hour, &reaches);
        }
        OneToAll {
            time_s: time,
            dist_m: dist,
        }
    }

    /// Distance along the lexicographically smallest time-minimal path;
    /// `reaches` marks nodes from which `dest` is reachable inside the DAG.
    fn lex_walk_dist(
        &self,
        time: &[f64],
        origin: NodeId,
        dest: usize,
        hour: usize,
        reaches: &[bool],
    ) -> f64 {
        let mut x = origin.idx();
        let mut dist = 0.0;
        while x != dest {
            // Out-edges are sorted by target, so the first DAG successor that
            // still reaches `dest` is the lexicographic choice.
            let mut advanced = false;
            for e in &self.out[x] {
                let v = e.to as usize;
                if reaches[v] && time[x] + e.tt_s[hour] == time[v] {
                    dist += e.length_m;
                    x = v;
                    advanced = true;
                    break;
                }
            }
            debug_assert!(advanced, "equal-time DAG walk must reach dest");
            if !advanced {
                return f64::INFINITY;
            }
        }
        dist
    }

    fn lex_walk(&self, time: &[f64], origin: NodeId, dest: NodeId, hour: usize) -> Vec<NodeId> {
        let n = self.names.len();
        let mut dag_in: Vec<Vec<u32>> = vec![Vec::new(); n];
        for u in 0..n {
            if time[u].is_infinite() {
                continue;
            }
            for e in &self.out[u] {
                if time[u] + e.tt_s[hour] == time[e.to as usize] {
                    dag_in[e.to as usize].push(u as u32);
                }
            }
        }
        let mut reaches = vec![false; n];
        reaches[dest.idx()] = true;
        let mut stack = vec![dest.0];
        while let Some(v) = stack.pop() {
            for &u in &dag_in[v as usize] {
                if !reaches[u as usize] {
                    reaches[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        let mut seq = vec![origin];
        let mut x = origin.idx();
        while x != dest.idx() {
            for e in &self.out[x] {
                let v = e.to as usize;
                if reaches[v] && time[x] + e.tt_s[hour] == time[v] {
                    seq.push(NodeId(v as u32));
                    x = v;
                    break;
                }
            }
        }
        seq
    }

    fn dijkstra(&self, origin: NodeId, hour: usize) -> Vec<f64> {
        let n = self.names.len();
        let mut time = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut heap = std::collections::BinaryHeap::new();
        time[origin.idx()] = 0.0;
        heap.push(MinScored(0.0, origin.0));
        while let Some(MinScored(t, u)) = heap.pop() {
            let u = u as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            for e in &self.out[u] {
                let v = e.to as usize;
                let alt = t + e.tt_s[hour];
                if alt < time[v] {
                    time[v] = alt;
                    heap.push(MinScored(alt, e.to));
                }
            }
        }
        time
    }
}

/// Min-heap adapter: smaller score pops first, ties by node index.
#[derive(PartialEq)]
struct MinScored(f64, u32);

impl Eq for MinScored {}

impl Ord for MinScored {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for MinScored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Loads a network from the four CSV files.
///
/// * nodes: `node_id`
/// * edges: `from,to,length_m,tt_h0,...,tt_h23`
/// * zones: `node_id,zone_id`
/// * depots: `node_id`
pub fn load_network(
    nodes_path: &Path,
    edges_path: &Path,
    zones_path: &Path,
    depots_path: &Path,
) -> Result<Network, NetworkError> {
    let ctx = |path: &Path| path.display().to_string();
    let wrap = |path: &Path, (line, msg): (usize, String)| NetworkError::Parse {
        file: ctx(path),
        line,
        msg,
    };

    let rows = csvio::read_table(nodes_path, "node_id").map_err(|e| wrap(nodes_path, e))?;
    let mut nodes = Vec::new();
    for row in &rows {
        nodes.push(csvio::ident(row, 0, "node id").map_err(|e| wrap(nodes_path, e))?);
    }

    let edge_header = {
        let mut h = String::from("from,to,length_m");
        for i in 0..HOURS {
            h.push_str(&format!(",tt_h{i}"));
        }
        h
    };
    let rows = csvio::read_table(edges_path, &edge_header).map_err(|e| wrap(edges_path, e))?;
    let mut edges = Vec::new();
    for row in &rows {
        let from = csvio::ident(row, 0, "node id").map_err(|e| wrap(edges_path, e))?;
        let to = csvio::ident(row, 1, "node id").map_err(|e| wrap(edges_path, e))?;
        let length_m: f64 = csvio::field(row, 2, "length").map_err(|e| wrap(edges_path, e))?;
        let mut tt = [0.0; HOURS];
        for (i, slot) in tt.iter_mut().enumerate() {
            *slot = csvio::field(row, 3 + i, "travel time").map_err(|e| wrap(edges_path, e))?;
        }
        edges.push(EdgeSpec {
            from,
            to,
            length_m,
            travel_time_s: tt,
        });
    }

    let rows = csvio::read_table(zones_path, "node_id,zone_id").map_err(|e| wrap(zones_path, e))?;
    let mut zones = Vec::new();
    for row in &rows {
        let node = csvio::ident(row, 0, "node id").map_err(|e| wrap(zones_path, e))?;
        let zone = csvio::ident(row, 1, "zone id").map_err(|e| wrap(zones_path, e))?;
        zones.push((node, zone));
    }

    let rows = csvio::read_table(depots_path, "node_id").map_err(|e| wrap(depots_path, e))?;
    let mut depots = Vec::new();
    for row in &rows {
        depots.push(csvio::ident(row, 0, "node id").map_err(|e| wrap(depots_path, e))?);
    }

    Network::new(nodes, edges, zones, depots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn line4() -> Network {
        fixture::line4().network().unwrap()
    }

    fn line4_td() -> Network {
        fixture::line4_td().network().unwrap()
    }

    #[test]
    fn line4_loads_with_expected_shape() {
        let net = line4();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.zone_count(), 4);
        assert_eq!(net.depots().len(), 1);
        let n0 = net.node_id("n0").unwrap();
        assert!(net.depots().contains(&n0));
        let total_edges: usize = (0..4)
            .map(|i| net.out[i].len())
            .sum();
        assert_eq!(total_edges, 6);
    }

    #[test]
    fn unknown_edge_endpoint_is_rejected() {
        let err = Network::new(
            vec!["a".into(), "b".into()],
            vec![
                EdgeSpec::constant("a", "b", 100.0, 10.0),
                EdgeSpec::constant("b", "c", 100.0, 10.0),
            ],
            vec![("a".into(), "z".into()), ("b".into(), "z".into())],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown node `c`"));
    }

    #[test]
    fn zero_travel_time_is_rejected() {
        let mut tt = [10.0; HOURS];
        tt[5] = 0.0;
        let err = Network::new(
            vec!["a".into(), "b".into()],
            vec![
                EdgeSpec {
                    from: "a".into(),
                    to: "b".into(),
                    length_m: 100.0,
                    travel_time_s: tt,
                },
                EdgeSpec::constant("b", "a", 100.0, 10.0),
            ],
            vec![("a".into(), "z".into()), ("b".into(), "z".into())],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("non-positive travel time"));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let err = Network::new(
            vec!["a".into(), "b".into()],
            vec![EdgeSpec::constant("a", "b", 100.0, 10.0)],
            vec![("a".into(), "z".into()), ("b".into(), "z".into())],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("strongly connected"));
    }

    #[test]
    fn line4_end_to_end_route() {
        let net = line4();
        let o = net.node_id("n0").unwrap();
        let d = net.node_id("n3").unwrap();
        let route = net.fastest_path(o, d, 0.0).unwrap();
        assert_eq!(route.travel_time_s, 180.0);
        assert_eq!(route.distance_m, 3000.0);
        let names: Vec<&str> = route
            .node_sequence
            .iter()
            .map(|n| net.node_name(*n))
            .collect();
        assert_eq!(names, ["n0", "n1", "n2", "n3"]);
    }

    #[test]
    fn identical_origin_and_destination() {
        let net = line4();
        let n2 = net.node_id("n2").unwrap();
        let route = net.fastest_path(n2, n2, 0.0).unwrap();
        assert_eq!(route.travel_time_s, 0.0);
        assert_eq!(route.distance_m, 0.0);
        assert_eq!(route.node_sequence, vec![n2]);
    }

    #[test]
    fn afternoon_snapshot_doubles_line4_td_times() {
        let net = line4_td();
        let o = net.node_id("n0").unwrap();
        let d = net.node_id("n3").unwrap();
        let route = net.fastest_path(o, d, 13.0 * 3600.0).unwrap();
        assert_eq!(route.travel_time_s, 360.0);
        // Morning still uses the fast snapshot.
        assert_eq!(net.fastest_path(o, d, 0.0).unwrap().travel_time_s, 180.0);
    }

    #[test]
    fn direct_metrics_examples() {
        let net = line4();
        let n0 = net.node_id("n0").unwrap();
        let n3 = net.node_id("n3").unwrap();
        assert_eq!(net.direct_metrics(n0, n3, 0.0).unwrap(), (180.0, 3000.0));
        assert_eq!(net.direct_metrics(n0, n0, 0.0).unwrap(), (0.0, 0.0));

        let td = line4_td();
        let n0 = td.node_id("n0").unwrap();
        let n1 = td.node_id("n1").unwrap();
        // 12:30 departure resolves the hour-12 snapshot.
        assert_eq!(
            td.direct_metrics(n0, n1, 12.0 * 3600.0 + 1800.0).unwrap().0,
            120.0
        );
    }

    #[test]
    fn hour_snapshot_wraps_past_midnight() {
        assert_eq!(hour_of(0.0), 0);
        assert_eq!(hour_of(3599.0), 0);
        assert_eq!(hour_of(3600.0), 1);
        assert_eq!(hour_of(86400.0), 0);
        assert_eq!(hour_of(90000.0), 1);
    }

    /// Exhaustive simple-path reference: minimal time, then smallest node
    /// sequence. Positive travel times make simple paths sufficient.
    fn brute_force(net: &Network, o: NodeId, d: NodeId, hour: usize) -> Option<(f64, f64, Vec<u32>)> {
        fn explore(
            net: &Network,
            hour: usize,
            x: usize,
            d: usize,
            seen: &mut Vec<bool>,
            path: &mut Vec<u32>,
            t: f64,
            dist: f64,
            best: &mut Option<(f64, f64, Vec<u32>)>,
        ) {
            if x == d {
                let cand = (t, dist, path.clone());
                let better = match best {
                    None => true,
                    Some((bt, _, bseq)) => {
                        cand.0 < *bt || (cand.0 == *bt && cand.2 < *bseq)
                    }
                };
                if better {
                    *best = Some(cand);
                }
                return;
            }
            for e in &net.out[x] {
                let v = e.to as usize;
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                path.push(e.to);
                explore(net, hour, v, d, seen, path, t + e.tt_s[hour], dist + e.length_m, best);
                path.pop();
                seen[v] = false;
            }
        }
        let mut seen = vec![false; net.node_count()];
        seen[o.idx()] = true;
        let mut path = vec![o.0];
        let mut best = None;
        explore(net, hour, o.idx(), d.idx(), &mut seen, &mut path, 0.0, 0.0, &mut best);
        best
    }

    fn random_net(rng: &mut impl rand::Rng) -> Network {
        use rand::seq::SliceRandom;
        let n = rng.gen_range(3..=8usize);
        let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        // Random Hamiltonian cycle keeps the graph strongly connected.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut pairs = BTreeSet::new();
        for i in 0..n {
            pairs.insert((order[i], order[(i + 1) % n]));
        }
        for _ in 0..(2 * n) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                pairs.insert((a, b));
            }
        }
        let edges = pairs
            .into_iter()
            .map(|(a, b)| {
                let tt = rng.gen_range(10..=120) as f64;
                let len = rng.gen_range(1..=20) as f64 * 100.0;
                EdgeSpec::constant(&format!("n{a}"), &format!("n{b}"), len, tt)
            })
            .collect();
        let zones = nodes.iter().map(|n| (n.clone(), "z0".to_string())).collect();
        Network::new(nodes, edges, zones, vec![]).unwrap()
    }

    #[test]
    fn fastest_path_matches_path_enumeration() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let net = random_net(&mut rng);
            let n = net.node_count();
            for o in 0..n {
                for d in 0..n {
                    let (o, d) = (NodeId(o as u32), NodeId(d as u32));
                    let route = net.fastest_path(o, d, 0.0).unwrap();
                    if o == d {
                        assert_eq!(route.travel_time_s, 0.0);
                        continue;
                    }
                    let (bt, bdist, bseq) = brute_force(&net, o, d, 0).unwrap();
                    assert_eq!(route.travel_time_s, bt);
                    assert_eq!(route.distance_m, bdist);
                    let seq: Vec<u32> = route.node_sequence.iter().map(|n| n.0).collect();
                    assert_eq!(seq, bseq);
                }
            }
        }
    }

    #[test]
    fn route_distance_is_sum_of_edge_lengths() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let net = random_net(&mut rng);
            let n = net.node_count();
            for o in 0..n {
                for d in 0..n {
                    let route = net
                        .fastest_path(NodeId(o as u32), NodeId(d as u32), 7.0 * 3600.0)
                        .unwrap();
                    let mut sum = 0.0;
                    for w in route.node_sequence.windows(2) {
                        sum += net.edge_between(w[0], w[1]).unwrap().0;
                    }
                    assert_eq!(sum, route.distance_m);
                }
            }
        }
    }

    #[test]
    fn repeat_queries_are_identical() {
        let net = line4_td();
        let o = net.node_id("n0").unwrap();
        let d = net.node_id("n3").unwrap();
        for t in [0.0, 3600.0, 12.5 * 3600.0, 86000.0] {
            assert_eq!(net.fastest_path(o, d, t).unwrap(), net.fastest_path(o, d, t).unwrap());
        }
    }

    #[test]
    fn triangle_inequality_holds_per_snapshot() {
        let net = line4();
        let ids: Vec<NodeId> = (0..4).map(|i| NodeId(i)).collect();
        for &a in &ids {
            for &b in &ids {
                for &c in &ids {
                    let ab = net.query(a, b, 0.0).unwrap().0;
                    let bc = net.query(b, c, 0.0).unwrap().0;
                    let ac = net.query(a, c, 0.0).unwrap().0;
                    assert!(ac <= ab + bc + 1e-9);
                }
            }
        }
    }
}
