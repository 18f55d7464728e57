use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkGraph;

use super::BackboneCycle;

/// `clusters[i]` is `i` for backbone vertices and otherwise the backbone
/// vertex that robot `i` is attached to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterAssignment {
    clusters: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(clusters: Vec<usize>) -> Self {
        ClusterAssignment { clusters }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.clusters
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.clusters[i]
    }

    /// Fixed points of the assignment, ascending.
    pub fn anchors(&self) -> Vec<usize> {
        (0..self.clusters.len()).filter(|&i| self.clusters[i] == i).collect()
    }

    /// Non-anchor robots attached to `anchor`, ascending.
    pub fn members(&self, anchor: usize) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&i| i != anchor && self.clusters[i] == anchor)
            .collect()
    }

    /// Every label points at a fixed point: `c[c[i]] == c[i]`.
    pub fn anchors_are_fixed_points(&self) -> bool {
        let n = self.clusters.len();
        self.clusters
            .iter()
            .all(|&c| c < n && self.clusters[c] == c)
    }
}

/// Attaches every vertex to its nearest backbone vertex.
///
/// Nearest means fewest hops over any link; ties go to the shorter Euclidean
/// path and then to the smaller backbone id. A multi-source Dijkstra over the
/// lexicographic key `(hops, length, anchor)` computes all of it at once.
pub fn assign_clusters(g: &NetworkGraph, cycle: &BackboneCycle) -> Result<ClusterAssignment> {
    let n = g.n();
    let mut key: Vec<Option<(usize, f64, usize)>> = vec![None; n];
    for &v in cycle.vertices() {
        key[v] = Some((0, 0.0, v));
    }
    let mut done = vec![false; n];
    let better = |a: (usize, f64, usize), b: (usize, f64, usize)| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .is_lt()
    };
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            if let Some(k) = key[v] {
                if pick.is_none_or(|p| better(k, key[p].unwrap())) {
                    pick = Some(v);
                }
            }
        }
        let Some(v) = pick else { break };
        done[v] = true;
        let (hops, len, anchor) = key[v].unwrap();
        for &w in g.neighbors(v) {
            if done[w] {
                continue;
            }
            let cand = (hops + 1, len + g.distance(v, w), anchor);
            if key[w].is_none_or(|k| better(cand, k)) {
                key[w] = Some(cand);
            }
        }
    }
    let clusters = key
        .iter()
        .enumerate()
        .map(|(v, k)| k.map(|k| k.2).ok_or(Error::Unreachable { vertex: v }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterAssignment::new(clusters))
}
