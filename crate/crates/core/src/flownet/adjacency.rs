use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::ingest::TractSet;

/// Undirected, unweighted contiguity graph with sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyNetwork {
    ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyNetwork {
    /// Build from undirected index pairs; edges are symmetrized and deduplicated.
    pub fn from_edges(ids: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = ids.len();
        let mut sets = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!("edge ({a},{b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::Validation(format!("self-edge on {:?}", ids[a])));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(AdjacencyNetwork {
            ids,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Undirected edges with `a < b`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Write `tract_a,tract_b` with one undirected edge per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("writing adjacency", e);
        w.write_record(["tract_a", "tract_b"]).map_err(err)?;
        for (a, b) in self.edges() {
            w.write_record([&self.ids[a], &self.ids[b]]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("writing adjacency", e))
    }
}

/// Queen contiguity: tracts are adjacent when their boundaries share at least one point.
pub fn build_queen_adjacency(tracts: &TractSet) -> Result<AdjacencyNetwork> {
    let list = tracts.tracts();
    for t in list {
        if t.polygon.centroid().is_err() {
            return Err(Error::Validation(format!("tract {:?} has a degenerate (zero-area) polygon", t.tract_id)));
        }
    }
    // Sweep over bounding boxes sorted by their western edge.
    let mut order: Vec<usize> = (0..list.len()).collect();
    order.sort_by(|&a, &b| {
        list[a]
            .polygon
            .bbox()
            .min
            .lon
            .total_cmp(&list[b].polygon.bbox().min.lon)
    });
    let mut edges = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let bi = list[i].polygon.bbox();
        for &j in &order[k + 1..] {
            if list[j].polygon.bbox().min.lon > bi.max.lon + crate::geometry::BOUNDARY_EPS {
                break;
            }
            if list[i].polygon.touches(&list[j].polygon) {
                edges.push((i, j));
            }
        }
    }
    AdjacencyNetwork::from_edges(tracts.ids().map(String::from).collect(), edges)
}

/// Read a `tract_a,tract_b` edge file (header optional) against the kept tracts.
pub fn load_custom_adjacency(path: &Path, tracts: &TractSet) -> Result<AdjacencyNetwork> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut edges = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if rec.len() != 2 {
            return Err(Error::parse(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        if i == 0 && &rec[0] == "tract_a" && &rec[1] == "tract_b" {
            continue;
        }
        let lookup = |id: &str| {
            tracts
                .position(id)
                .ok_or_else(|| Error::parse(path, line, format!("unknown tract_id {id:?}")))
        };
        let (a, b) = (lookup(&rec[0])?, lookup(&rec[1])?);
        if a == b {
            return Err(Error::parse(path, line, format!("self-edge on {:?}", &rec[0])));
        }
        edges.push((a, b));
    }
    if edges.is_empty() {
        warn!("adjacency file {} has no edges; every origin-destination pair is unreachable", path.display());
    }
    AdjacencyNetwork::from_edges(tracts.ids().map(String::from).collect(), edges)
}
