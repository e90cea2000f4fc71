use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_edge_list, zero_hours, AdjacencyNetwork, HourWeights, OdNetwork};
use crate::error::{Error, Result};
use crate::HOURS_PER_WEEK;

const UNREACHABLE: u32 = u32::MAX;

fn bfs_distances(adj: &AdjacencyNetwork, source: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in adj.neighbors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Walk from `orig` towards the destination whose BFS distances are `to_dest`,
/// always stepping to the smallest neighbour one hop closer. Among all minimum-hop
/// paths this yields the lexicographically smallest node sequence.
fn greedy_path(adj: &AdjacencyNetwork, to_dest: &[u32], orig: usize) -> Option<Vec<usize>> {
    if to_dest[orig] == UNREACHABLE {
        return None;
    }
    let mut path = Vec::with_capacity(to_dest[orig] as usize + 1);
    let mut u = orig;
    path.push(u);
    while to_dest[u] > 0 {
        u = *adj
            .neighbors(u)
            .iter()
            .find(|&&v| to_dest[v] == to_dest[u] - 1)
            .expect("BFS layers are contiguous");
        path.push(u);
    }
    Some(path)
}

/// Minimum-hop path from `orig` to `dest`, ties broken towards the smallest node sequence.
/// `None` when `dest` is unreachable; `[orig]` when `orig == dest`.
pub fn shortest_path(adj: &AdjacencyNetwork, orig: usize, dest: usize) -> Option<Vec<usize>> {
    greedy_path(adj, &bfs_distances(adj, dest), orig)
}

/// One chosen path per OD pair.
#[derive(Debug, Clone, Default)]
pub struct Routes {
    paths: BTreeMap<(usize, usize), Option<Vec<usize>>>,
    bfs_runs: usize,
}

impl Routes {
    pub fn path(&self, orig: usize, dest: usize) -> Option<&[usize]> {
        self.paths.get(&(orig, dest)).and_then(|p| p.as_deref())
    }

    /// Number of OD pairs routed; one path computation per distinct pair.
    pub fn paths_computed(&self) -> usize {
        self.paths.len()
    }

    /// Number of breadth-first searches run (one per distinct destination).
    pub fn bfs_runs(&self) -> usize {
        self.bfs_runs
    }
}

/// Route every OD edge once. Searches run per destination in parallel.
pub fn route_od_pairs(adj: &AdjacencyNetwork, od: &OdNetwork) -> Routes {
    let mut by_dest: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ((k, l), _) in od.edges() {
        by_dest.entry(l).or_default().push(k);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_dest.into_iter().collect();
    let routed: Vec<Vec<((usize, usize), Option<Vec<usize>>)>> = groups
        .par_iter()
        .map(|(dest, origins)| {
            let dist = bfs_distances(adj, *dest);
            origins
                .iter()
                .map(|&k| ((k, *dest), greedy_path(adj, &dist, k)))
                .collect()
        })
        .collect();
    Routes {
        bfs_runs: groups.len(),
        paths: routed.into_iter().flatten().collect(),
    }
}

/// Directed, hour-weighted network of the edges used by routed OD flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPathNetwork {
    ids: Vec<String>,
    edges: BTreeMap<(usize, usize), HourWeights>,
}

impl ShortestPathNetwork {
    pub fn weights(&self, from: usize, to: usize) -> Option<&HourWeights> {
        self.edges.get(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), &HourWeights)> + '_ {
        self.edges.iter().map(|(&k, v)| (k, v))
    }

    pub fn hourly_totals(&self) -> Vec<u64> {
        let mut out = vec![0; HOURS_PER_WEEK];
        for w in self.edges.values() {
            for (o, x) in out.iter_mut().zip(w.iter()) {
                *o += x;
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_edge_list(self.edges(), &self.ids, out)
    }
}

fn sp_network_from_routes(adj: &AdjacencyNetwork, od: &OdNetwork, routes: &Routes) -> ShortestPathNetwork {
    let mut edges = BTreeMap::new();
    for (a, b) in adj.edges() {
        edges.insert((a, b), zero_hours());
        edges.insert((b, a), zero_hours());
    }
    for ((k, l), w) in od.edges() {
        let Some(path) = routes.path(k, l) else { continue };
        for hop in path.windows(2) {
            let slot = edges.get_mut(&(hop[0], hop[1])).expect("paths follow adjacency edges");
            for (s, x) in slot.iter_mut().zip(w.iter()) {
                *s += x;
            }
        }
    }
    ShortestPathNetwork {
        ids: adj.ids().to_vec(),
        edges,
    }
}

/// Build the shortest-path network: start from the adjacency edges (both directions) with zero
/// weights, route every OD edge once, and add its 168-slot weights to each directed hop.
pub fn build_shortest_path_network(adj: &AdjacencyNetwork, od: &OdNetwork) -> ShortestPathNetwork {
    sp_network_from_routes(adj, od, &route_od_pairs(adj, od))
}

/// Transitions crossing each tract (neither origin nor destination), per hour of week.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassThroughCounts {
    ids: Vec<String>,
    counts: Vec<u64>,
}

impl PassThroughCounts {
    pub fn zeros(ids: Vec<String>) -> Self {
        let counts = vec![0; ids.len() * HOURS_PER_WEEK];
        PassThroughCounts { ids, counts }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, node: usize, hour: usize) -> u64 {
        self.counts[node * HOURS_PER_WEEK + hour]
    }

    pub fn row(&self, node: usize) -> &[u64] {
        &self.counts[node * HOURS_PER_WEEK..(node + 1) * HOURS_PER_WEEK]
    }

    fn add(&mut self, node: usize, hour: usize, w: u64) {
        self.counts[node * HOURS_PER_WEEK + hour] += w;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Write `tract_id,hour,count` for non-zero cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing pass-through counts", e);
        w.write_record(["tract_id", "hour", "count"]).map_err(err)?;
        for (node, id) in self.ids.iter().enumerate() {
            for (hour, &c) in self.row(node).iter().enumerate() {
                if c > 0 {
                    w.write_record([id.as_str(), &hour.to_string(), &c.to_string()]).map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("writing pass-through counts", e))
    }

    /// Read counts written by [`write_csv`](Self::write_csv) for the given node ids.
    pub fn read_csv(path: &Path, ids: Vec<String>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            tract_id: String,
            hour: usize,
            count: u64,
        }
        let index: std::collections::HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut cells = Vec::new();
        crate::ingest::for_each_csv_row(path, &["tract_id", "hour", "count"], |line, row: Row| {
            let node = *index
                .get(row.tract_id.as_str())
                .ok_or_else(|| Error::parse(path, line, format!("unknown tract_id {:?}", row.tract_id)))?;
            if row.hour >= HOURS_PER_WEEK {
                return Err(Error::parse(path, line, format!("hour {} outside 0..168", row.hour)));
            }
            cells.push((node, row.hour, row.count));
            Ok(())
        })?;
        drop(index);
        let mut out = PassThroughCounts::zeros(ids);
        for (node, hour, count) in cells {
            out.add(node, hour, count);
        }
        Ok(out)
    }
}

fn pass_through_from_routes(adj: &AdjacencyNetwork, od: &OdNetwork, routes: &Routes) -> PassThroughCounts {
    let mut out = PassThroughCounts::zeros(adj.ids().to_vec());
    for ((k, l), w) in od.edges() {
        let Some(path) = routes.path(k, l) else { continue };
        if path.len() <= 2 {
            continue;
        }
        for &node in &path[1..path.len() - 1] {
            for (hour, &x) in w.iter().enumerate() {
                if x > 0 {
                    out.add(node, hour, x);
                }
            }
        }
    }
    out
}

/// Credit every interior node of each routed OD path with the edge's hourly weights.
pub fn pass_through_counts(adj: &AdjacencyNetwork, od: &OdNetwork) -> PassThroughCounts {
    pass_through_from_routes(adj, od, &route_od_pairs(adj, od))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub od_edges: u64,
    pub paths_computed: u64,
    pub bfs_runs: u64,
    pub unreachable_pairs: u64,
    pub unreachable_transitions: u64,
}

/// The three networks plus the pass-through counts derived from one routing pass.
#[derive(Debug, Clone)]
pub struct FlowNetworks {
    pub adjacency: AdjacencyNetwork,
    pub od: OdNetwork,
    pub shortest_path: ShortestPathNetwork,
    pub pass_through: PassThroughCounts,
    pub report: RoutingReport,
}

impl FlowNetworks {
    pub fn build(adjacency: AdjacencyNetwork, od: OdNetwork) -> Self {
        let routes = route_od_pairs(&adjacency, &od);
        let mut report = RoutingReport {
            od_edges: od.edge_count() as u64,
            paths_computed: routes.paths_computed() as u64,
            bfs_runs: routes.bfs_runs() as u64,
            ..Default::default()
        };
        for ((k, l), w) in od.edges() {
            if routes.path(k, l).is_none() {
                report.unreachable_pairs += 1;
                report.unreachable_transitions += w.iter().sum::<u64>();
            }
        }
        if report.unreachable_pairs > 0 {
            warn!(
                "{} OD pair(s) ({} transitions) unreachable in the adjacency network; excluded from routing",
                report.unreachable_pairs, report.unreachable_transitions
            );
        }
        let shortest_path = sp_network_from_routes(&adjacency, &od, &routes);
        let pass_through = pass_through_from_routes(&adjacency, &od, &routes);
        FlowNetworks {
            adjacency,
            od,
            shortest_path,
            pass_through,
            report,
        }
    }
}
