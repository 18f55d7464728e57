//! Branch construction: one minimum spanning tree per cluster.
//!
//! Edges are ranked by distance, then by link class (reliable before
//! critical). Within a run of edges with identical rank the next edge taken
//! is the one that keeps the larger endpoint degree smallest, counting
//! degrees over the topology built so far (backbone vertices start at 2).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::netmodel::{LinkClass, NetworkGraph};

use super::{BackboneCycle, Branch, ClusterAssignment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEdge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub class: LinkClass,
}

impl CandidateEdge {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.class.cmp(&other.class))
    }
}

/// Kruskal over `edges` restricted to `vertices`, with the degree-aware
/// tie-break. `degree` is indexed by vertex id and updated in place.
///
/// Returns the chosen edges and whether they span `vertices`.
pub fn spanning_tree(vertices: &[usize], edges: &[CandidateEdge], degree: &mut [usize]) -> (Vec<CandidateEdge>, bool) {
    let mut sorted: Vec<CandidateEdge> = edges
        .iter()
        .filter(|e| vertices.contains(&e.a) && vertices.contains(&e.b) && e.a != e.b)
        .copied()
        .collect();
    sorted.sort_by(|x, y| x.rank_cmp(y).then((x.a.min(x.b), x.a.max(x.b)).cmp(&(y.a.min(y.b), y.a.max(y.b)))));

    let mut parent: Vec<usize> = (0..degree.len()).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }

    let mut chosen = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].rank_cmp(&sorted[start]) == Ordering::Equal {
            end += 1;
        }
        let mut group: Vec<CandidateEdge> = sorted[start..end].to_vec();
        loop {
            group.retain(|e| find(&mut parent, e.a) != find(&mut parent, e.b));
            // stable min keeps the id order among equal degree outcomes
            let Some((idx, _)) = group
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (degree[e.a].max(degree[e.b]) + 1, degree[e.a].min(degree[e.b])))
            else {
                break;
            };
            let e = group.remove(idx);
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            parent[ra] = rb;
            degree[e.a] += 1;
            degree[e.b] += 1;
            chosen.push(e);
        }
        start = end;
    }
    let spans = vertices.len() <= 1 || chosen.len() + 1 == vertices.len();
    (chosen, spans)
}

fn cluster_candidates(g: &NetworkGraph, vertices: &[usize]) -> Vec<CandidateEdge> {
    let mut out = Vec::new();
    for (k, &a) in vertices.iter().enumerate() {
        for &b in &vertices[k + 1..] {
            if g.has_edge(a, b) {
                out.push(CandidateEdge {
                    a: a.min(b),
                    b: a.max(b),
                    distance: g.distance(a, b),
                    class: g.link(a, b),
                });
            }
        }
    }
    out
}

/// Builds the branch forest; fails if some cluster cannot be spanned.
pub fn build_branches(g: &NetworkGraph, cycle: &BackboneCycle, clusters: &ClusterAssignment) -> Result<Vec<Branch>> {
    let (branches, disconnected) = branch_forest(g, cycle, clusters);
    match disconnected.first() {
        Some(&anchor) => Err(Error::ClusterDisconnected { anchor }),
        None => Ok(branches),
    }
}

/// Like [`build_branches`] but keeps whatever forest can be built and
/// reports the anchors whose clusters could not be spanned.
pub fn branch_forest(g: &NetworkGraph, cycle: &BackboneCycle, clusters: &ClusterAssignment) -> (Vec<Branch>, Vec<usize>) {
    let mut degree = vec![0usize; g.n()];
    for &v in cycle.vertices() {
        degree[v] = 2;
    }
    let mut branches = Vec::new();
    let mut disconnected = Vec::new();
    let mut anchors: Vec<usize> = cycle.vertices().to_vec();
    anchors.sort_unstable();
    for anchor in anchors {
        let members: Vec<usize> = clusters
            .members(anchor)
            .into_iter()
            .filter(|v| !cycle.contains(*v))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut vertices = vec![anchor];
        vertices.extend(members);
        let candidates = cluster_candidates(g, &vertices);
        let (tree, spans) = spanning_tree(&vertices, &candidates, &mut degree);
        if !spans {
            disconnected.push(anchor);
        }
        branches.extend(tree.into_iter().map(|e| Branch::new(e.a, e.b, e.class)));
    }
    (branches, disconnected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::NetworkParams;

    fn edge(a: usize, b: usize, distance: f64, class: LinkClass) -> CandidateEdge {
        CandidateEdge { a, b, distance, class }
    }

    #[test]
    fn single_pendant() {
        let p = NetworkParams::new(10.0, 1.0, 0.2).unwrap();
        let pos = [(0.0, 0.0), (0.8, 0.0), (0.4, 0.6), (1.7, 0.0)];
        let g = NetworkGraph::from_positions(&p, &pos);
        let cycle = BackboneCycle::new(vec![0, 1, 2]);
        let clusters = ClusterAssignment::new(vec![0, 1, 2, 1]);
        let b = build_branches(&g, &cycle, &clusters).unwrap();
        assert_eq!(b, vec![Branch::new(1, 3, LinkClass::Reliable)]);
    }

    #[test]
    fn reliable_wins_exact_distance_tie() {
        let edges = [edge(0, 2, 1.0, LinkClass::Critical), edge(0, 1, 0.5, LinkClass::Reliable), edge(1, 2, 1.0, LinkClass::Reliable)];
        let mut degree = vec![0; 3];
        let (tree, spans) = spanning_tree(&[0, 1, 2], &edges, &mut degree);
        assert!(spans);
        assert_eq!(tree.len(), 2);
        assert!(tree.iter().any(|e| (e.a, e.b) == (1, 2)));
        assert!(tree.iter().all(|e| e.class == LinkClass::Reliable));
    }

    #[test]
    fn equal_rank_prefers_low_degree_endpoint() {
        // anchor 0 already carries degree 2 from the backbone; 1 attaches to 0,
        // then 2 may hang off 0 or 1 at equal cost and should pick 1
        let edges = [
            edge(0, 1, 0.3, LinkClass::Reliable),
            edge(0, 2, 0.6, LinkClass::Reliable),
            edge(1, 2, 0.6, LinkClass::Reliable),
        ];
        let mut degree = vec![2, 0, 0];
        let (tree, _) = spanning_tree(&[0, 1, 2], &edges, &mut degree);
        assert_eq!(tree.len(), 2);
        assert!(tree.iter().any(|e| (e.a, e.b) == (1, 2)));
        assert_eq!(degree, vec![3, 2, 1]);
    }

    #[test]
    fn disconnected_cluster_is_reported() {
        let edges = [edge(0, 1, 0.3, LinkClass::Reliable)];
        let mut degree = vec![0; 3];
        let (tree, spans) = spanning_tree(&[0, 1, 2], &edges, &mut degree);
        assert_eq!(tree.len(), 1);
        assert!(!spans);
    }
}
