//! Exact longest simple cycle search over the reliable-edge subgraph.

use crate::error::{Error, Result};
use crate::netmodel::NetworkGraph;

use super::BackboneCycle;

/// Bitmask search keeps vertex sets in a `u64`.
pub const MAX_SEARCH_VERTICES: usize = 64;

/// Vertex limit for the exhaustive enumeration oracle.
pub const MAX_ORACLE_VERTICES: usize = 10;

struct ReliableMasks {
    adj: Vec<u64>,
}

impl ReliableMasks {
    fn new(g: &NetworkGraph) -> Self {
        let n = g.n();
        let adj = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| g.is_reliable(i, j))
                    .fold(0u64, |m, j| m | (1 << j))
            })
            .collect();
        ReliableMasks { adj }
    }

    /// Vertices of `allowed` reachable from `from` without leaving `allowed`.
    fn reach(&self, from: usize, allowed: u64) -> u64 {
        let mut seen = 0u64;
        let mut frontier = self.adj[from] & allowed;
        while frontier != 0 {
            seen |= frontier;
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= self.adj[v];
            }
            frontier = next & allowed & !seen;
        }
        seen
    }
}

/// Returns a maximum-cardinality simple cycle of reliable edges.
///
/// `order` only steers the search for the maximum length; among all cycles of
/// that length the canonically smallest one is returned, so the result does
/// not depend on `order`.
pub fn largest_cycle(g: &NetworkGraph, order: &[usize]) -> Result<BackboneCycle> {
    let n = g.n();
    if n < 3 {
        return Err(Error::NoBackbone);
    }
    if n > MAX_SEARCH_VERTICES {
        return Err(Error::InstanceTooLarge {
            n,
            max: MAX_SEARCH_VERTICES,
        });
    }
    let masks = ReliableMasks::new(g);
    let length = longest_cycle_length(&masks, order);
    if length < 3 {
        return Err(Error::NoBackbone);
    }
    let vertices = smallest_cycle_of_length(&masks, n, length)
        .expect("a cycle of the maximum length was found in the first pass");
    Ok(BackboneCycle::new(vertices))
}

fn longest_cycle_length(masks: &ReliableMasks, order: &[usize]) -> usize {
    let n = masks.adj.len();
    let mut best = 0;
    // each cycle is discovered from its earliest vertex in `order`
    let mut later = (0..n).fold(0u64, |m, v| m | (1 << v));
    for &start in order {
        later &= !(1u64 << start);
        let candidates = later.count_ones() as usize + 1;
        if candidates <= best {
            break;
        }
        let component = masks.reach(start, later);
        if (component.count_ones() as usize) < best {
            continue;
        }
        let mut search = LongestSearch {
            masks,
            start,
            allowed: component,
            best: &mut best,
        };
        search.extend(start, 1u64 << start, 1);
        if best == n {
            break;
        }
    }
    best
}

struct LongestSearch<'a> {
    masks: &'a ReliableMasks,
    start: usize,
    allowed: u64,
    best: &'a mut usize,
}

impl LongestSearch<'_> {
    fn extend(&mut self, current: usize, visited: u64, len: usize) {
        if len >= 3 && self.masks.adj[current] & (1 << self.start) != 0 && len > *self.best {
            *self.best = len;
        }
        let free = self.allowed & !visited;
        let reachable = self.masks.reach(current, free);
        // the path can grow by at most the free vertices still reachable, and
        // the start must be adjacent to one of them to close the cycle
        if len + reachable.count_ones() as usize <= *self.best {
            return;
        }
        if reachable & self.masks.adj[self.start] == 0 {
            return;
        }
        let mut next = self.masks.adj[current] & free;
        while next != 0 {
            let v = next.trailing_zeros() as usize;
            next &= next - 1;
            self.extend(v, visited | (1 << v), len + 1);
        }
    }
}

/// Lexicographically smallest canonical cycle with exactly `length` vertices.
fn smallest_cycle_of_length(masks: &ReliableMasks, n: usize, length: usize) -> Option<Vec<usize>> {
    for start in 0..n {
        let allowed = (start + 1..n).fold(0u64, |m, v| m | (1 << v));
        if (allowed.count_ones() as usize) + 1 < length {
            break;
        }
        let mut path = vec![start];
        if exact_search(masks, start, allowed, length, &mut path, 1u64 << start) {
            return Some(path);
        }
    }
    None
}

fn exact_search(
    masks: &ReliableMasks,
    start: usize,
    allowed: u64,
    length: usize,
    path: &mut Vec<usize>,
    visited: u64,
) -> bool {
    let current = *path.last().unwrap();
    if path.len() == length {
        return masks.adj[current] & (1 << start) != 0;
    }
    let free = allowed & !visited;
    if path.len() + (masks.reach(current, free).count_ones() as usize) < length {
        return false;
    }
    // ascending exploration makes the first hit the lexicographic minimum
    let mut next = masks.adj[current] & free;
    while next != 0 {
        let v = next.trailing_zeros() as usize;
        next &= next - 1;
        path.push(v);
        if exact_search(masks, start, allowed, length, path, visited | (1 << v)) {
            return true;
        }
        path.pop();
    }
    false
}

/// Rotates a cycle to start at its smallest vertex and picks the direction
/// whose second vertex is smaller.
pub fn canonicalize(cycle: &[usize]) -> Vec<usize> {
    if cycle.is_empty() {
        return Vec::new();
    }
    let (pos, _) = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, v)| *v)
        .unwrap();
    let len = cycle.len();
    let forward: Vec<usize> = (0..len).map(|k| cycle[(pos + k) % len]).collect();
    let backward: Vec<usize> = (0..len).map(|k| cycle[(pos + len - k) % len]).collect();
    forward.min(backward)
}

/// Every simple cycle of the reliable subgraph in canonical form, sorted.
///
/// Exhaustive enumeration without pruning, used to cross-check
/// [`largest_cycle`].
pub fn enumerate_cycles_oracle(g: &NetworkGraph) -> Result<Vec<Vec<usize>>> {
    let n = g.n();
    if n > MAX_ORACLE_VERTICES {
        return Err(Error::InstanceTooLarge {
            n,
            max: MAX_ORACLE_VERTICES,
        });
    }
    fn walk(g: &NetworkGraph, path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let start = path[0];
        let current = *path.last().unwrap();
        for next in 0..g.n() {
            if !g.is_reliable(current, next) {
                continue;
            }
            if next == start && path.len() >= 3 && path[1] < current {
                out.push(path.clone());
            }
            if next > start && !on_path[next] {
                on_path[next] = true;
                path.push(next);
                walk(g, path, on_path, out);
                path.pop();
                on_path[next] = false;
            }
        }
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut on_path = vec![false; n];
        on_path[start] = true;
        walk(g, &mut vec![start], &mut on_path, &mut out);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::NetworkParams;

    fn params() -> NetworkParams {
        NetworkParams::new(10.0, 1.0, 0.2).unwrap()
    }

    fn identity(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn triangle() {
        let g = NetworkGraph::from_positions(&params(), &[(0.0, 0.0), (0.5, 0.0), (0.2, 0.4)]);
        assert_eq!(largest_cycle(&g, &identity(3)).unwrap().vertices(), &[0, 1, 2]);
        assert_eq!(enumerate_cycles_oracle(&g).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn unit_square_without_diagonals() {
        // sides 1.0 reliable, diagonals sqrt(2) > 1.2 disconnected
        let g = NetworkGraph::from_positions(&params(), &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let all = enumerate_cycles_oracle(&g).unwrap();
        assert_eq!(all, vec![vec![0, 1, 2, 3]]);
        assert_eq!(largest_cycle(&g, &[2, 0, 3, 1]).unwrap().vertices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn path_has_no_backbone() {
        let pos: Vec<(f64, f64)> = (0..5).map(|i| (i as f64 * 0.9, 0.0)).collect();
        let g = NetworkGraph::from_positions(&params(), &pos);
        assert!(matches!(largest_cycle(&g, &identity(5)), Err(Error::NoBackbone)));
        assert!(enumerate_cycles_oracle(&g).unwrap().is_empty());
    }

    #[test]
    fn k4_has_seven_cycles() {
        let pos = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)];
        let g = NetworkGraph::from_positions(&params(), &pos);
        let all = enumerate_cycles_oracle(&g).unwrap();
        assert_eq!(all.iter().filter(|c| c.len() == 3).count(), 4);
        assert_eq!(all.iter().filter(|c| c.len() == 4).count(), 3);
        assert_eq!(all.len(), 7);
        // smallest canonical Hamiltonian cycle of K4
        assert_eq!(largest_cycle(&g, &identity(4)).unwrap().vertices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn critical_edges_are_not_backbone() {
        // square with side 1.1: critical sides only
        let pos = [(0.0, 0.0), (1.1, 0.0), (1.1, 1.1), (0.0, 1.1)];
        let g = NetworkGraph::from_positions(&params(), &pos);
        assert!(matches!(largest_cycle(&g, &identity(4)), Err(Error::NoBackbone)));
    }

    #[test]
    fn canonical_form() {
        assert_eq!(canonicalize(&[3, 1, 2]), vec![1, 2, 3]);
        assert_eq!(canonicalize(&[2, 5, 0, 4]), vec![0, 4, 2, 5]);
        assert_eq!(canonicalize(&[0, 4, 2, 5]), vec![0, 4, 2, 5]);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let pos: Vec<(f64, f64)> = (0..11).map(|i| (i as f64 * 0.1, 0.0)).collect();
        let g = NetworkGraph::from_positions(&params(), &pos);
        assert!(matches!(enumerate_cycles_oracle(&g), Err(Error::InstanceTooLarge { .. })));
    }
}
