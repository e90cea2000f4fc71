//! Brute-force routing oracle: enumerates simple paths instead of running a BFS.

#![allow(dead_code)]

/// Shortest path by exhaustive enumeration, ties broken to the lexicographically smallest
/// node sequence. Paths of length 0, 1, 2, ... are enumerated until one reaches `dest`.
pub fn brute_shortest_path(adj: &[Vec<bool>], orig: usize, dest: usize) -> Option<Vec<usize>> {
    let n = adj.len();
    for hops in 0..n {
        let mut best: Option<Vec<usize>> = None;
        let mut path = vec![orig];
        let mut used = vec![false; n];
        used[orig] = true;
        extend(adj, dest, hops, &mut path, &mut used, &mut best);
        if best.is_some() {
            return best;
        }
    }
    None
}

fn extend(
    adj: &[Vec<bool>],
    dest: usize,
    hops: usize,
    path: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<Vec<usize>>,
) {
    let last = *path.last().unwrap();
    if path.len() == hops + 1 {
        if last == dest && best.as_ref().is_none_or(|b| path.as_slice() < b.as_slice()) {
            *best = Some(path.clone());
        }
        return;
    }
    for next in 0..adj.len() {
        if adj[last][next] && !used[next] {
            used[next] = true;
            path.push(next);
            extend(adj, dest, hops, path, used, best);
            path.pop();
            used[next] = false;
        }
    }
}

/// OD flow: origin, destination, hour of week, weight.
pub type OdFlow = (usize, usize, usize, u64);

/// Pass-through counts (node-major, 168 slots per node) and the per-hour sum of
/// weight × hop length over all routable flows.
pub fn brute_pass_through(adj: &[Vec<bool>], flows: &[OdFlow]) -> (Vec<u64>, Vec<u64>) {
    let mut counts = vec![0u64; adj.len() * 168];
    let mut hop_weight = vec![0u64; 168];
    for &(k, l, hour, w) in flows {
        let Some(path) = brute_shortest_path(adj, k, l) else { continue };
        hop_weight[hour] += w * (path.len() as u64 - 1);
        if path.len() > 2 {
            for &node in &path[1..path.len() - 1] {
                counts[node * 168 + hour] += w;
            }
        }
    }
    (counts, hop_weight)
}
